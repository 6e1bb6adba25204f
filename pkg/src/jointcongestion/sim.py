"""Stochastic M/M/1 validation of a static routing.

Every source emits a Poisson stream that is split at random in proportion
to the routing. Each path is a FIFO exponential server feeding the FIFO
exponential server of its node. FIFO single-server queues are simulated
exactly with the Lindley recursion

    depart[k] = max(arrive[k], depart[k-1]) + service[k],

evaluated in closed form as a running maximum, so a run costs a few sorts
and cumulative sums instead of a Python event loop.
"""
from dataclasses import dataclass

import numpy as np

from .errors import UnstableRouting

# stream kinds for seed derivation
_ARRIVAL, _ROUTE, _PATH, _NODE = range(4)
N_BATCHES = 20


@dataclass(frozen=True)
class SimConfig:
    horizon: float
    seed: int = 0
    ewma_weight: float = 0.05
    warmup: float = None
    sample_interval: float = None

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.warmup is not None and not 0 <= self.warmup < self.horizon:
            raise ValueError("need 0 <= warmup < horizon")
        if not 0 < self.ewma_weight < 1:
            raise ValueError("ewma_weight must lie in (0, 1)")
        if self.sample_interval is not None and not self.sample_interval > 0:
            raise ValueError("sample_interval must be positive")


@dataclass
class SimReport:
    sample_times: np.ndarray
    node_util_series: np.ndarray
    node_queue_series: np.ndarray
    node_util_timeavg: np.ndarray
    node_util_stderr: np.ndarray
    persource_mean_delay: np.ndarray
    persource_delay_series: np.ndarray
    empirical_split: np.ndarray
    messages: np.ndarray
    counts: dict


def ewma(series, weight):
    """Exponentially weighted moving average, seeded with the first sample."""
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise ValueError("empty series")
    if not 0 < weight < 1:
        raise ValueError("weight must lie in (0, 1)")
    y = np.empty_like(x)
    y[0] = x[0]
    keep = 1.0 - weight
    for k in range(1, x.size):
        y[k] = keep * y[k - 1] + weight * x[k]
    return y


def lindley(arrivals, service):
    """Departure times of a FIFO single-server queue (arrivals sorted)."""
    c = np.cumsum(service)
    return c + np.maximum.accumulate(arrivals - (c - service))


class _Queue:
    """Sample path of one FIFO queue."""

    def __init__(self, arrivals, service):
        self.arrivals = arrivals
        self.service = service
        self.departures = lindley(arrivals, service)
        self.starts = self.departures - service
        self._cum = np.concatenate([[0.0], np.cumsum(service)])

    def busy_until(self, t):
        """Total busy time on ``[0, t]`` for each ``t``."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.starts, t, side="right") - 1
        safe = np.maximum(idx, 0)
        if self.service.size == 0:
            return np.zeros_like(t)
        part = np.minimum(t - self.starts[safe], self.service[safe])
        return np.where(idx >= 0, self._cum[safe] + part, 0.0)

    def in_system(self, t):
        a = np.searchsorted(self.arrivals, t, side="right")
        d = np.searchsorted(self.departures, t, side="right")
        return a - d


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _require_stable(inst, r):
    r = np.asarray(r, dtype=float)
    if r.shape != (inst.m, inst.n):
        raise UnstableRouting(f"routing shape {r.shape} != {(inst.m, inst.n)}")
    if np.any(r < 0):
        raise UnstableRouting("negative rate in routing")
    if np.any(np.abs(r.sum(axis=1) - inst.lam) > 1e-9 * inst.lam):
        raise UnstableRouting("routing rows do not sum to the offered rates")
    if np.any(r >= inst.mu_access):
        i, j = np.argwhere(r >= inst.mu_access)[0]
        raise UnstableRouting(f"path ({i}, {j}) rate {r[i, j]!r} >= {inst.mu_access[i, j]!r}")
    loads = r.sum(axis=0)
    if np.any(loads >= inst.mu_node):
        j = int(np.argmax(loads >= inst.mu_node))
        raise UnstableRouting(f"node {j} load {loads[j]!r} >= {inst.mu_node[j]!r}")
    return r


def simulate(inst, r, cfg):
    """Simulate the tandem access/node queues under routing ``r``."""
    r = _require_stable(inst, r)
    m, n = inst.m, inst.n
    T = float(cfg.horizon)
    warm = 0.1 * T if cfg.warmup is None else float(cfg.warmup)
    dt = 100.0 / inst.mu_node.min() if cfg.sample_interval is None else cfg.sample_interval
    edges = np.arange(0.0, T + 0.5 * dt, dt)
    if edges[-1] < T:
        edges = np.append(edges, T)
    times = edges[1:]

    src_time, src_route = [], []
    for i in range(m):
        g = _rng(cfg.seed, _ARRIVAL, i)
        k = g.poisson(inst.lam[i] * T)
        src_time.append(np.sort(g.uniform(0.0, T, k)))
        prob = r[i] / r[i].sum()
        src_route.append(_rng(cfg.seed, _ROUTE, i).choice(n, size=k, p=prob))

    counts = {
        "path_arrivals": np.zeros((m, n), dtype=np.int64),
        "path_departures": np.zeros((m, n), dtype=np.int64),
        "path_in_system": np.zeros((m, n), dtype=np.int64),
        "node_arrivals": np.zeros(n, dtype=np.int64),
        "node_departures": np.zeros(n, dtype=np.int64),
        "node_in_system": np.zeros(n, dtype=np.int64),
    }
    feeds = [[] for _ in range(n)]
    for i in range(m):
        for j in range(n):
            a = src_time[i][src_route[i] == j]
            s = _rng(cfg.seed, _PATH, i, j).exponential(1.0 / inst.mu_access[i, j], a.size)
            q = _Queue(a, s)
            counts["path_arrivals"][i, j] = a.size
            counts["path_departures"][i, j] = np.count_nonzero(q.departures <= T)
            counts["path_in_system"][i, j] = np.count_nonzero((a <= T) & (q.departures > T))
            feeds[j].append((q.departures, np.full(a.size, i), a))

    util_series = np.empty((n, times.size))
    queue_series = np.empty((n, times.size), dtype=np.int64)
    util_avg = np.empty(n)
    util_se = np.empty(n)
    sojourn = [[] for _ in range(m)]
    batch_edges = np.linspace(warm, T, N_BATCHES + 1)
    for j in range(n):
        arr = np.concatenate([f[0] for f in feeds[j]])
        who = np.concatenate([f[1] for f in feeds[j]])
        born = np.concatenate([f[2] for f in feeds[j]])
        order = np.argsort(arr, kind="stable")
        arr, who, born = arr[order], who[order], born[order]
        s = _rng(cfg.seed, _NODE, j).exponential(1.0 / inst.mu_node[j], arr.size)
        q = _Queue(arr, s)
        in_window = arr <= T
        counts["node_arrivals"][j] = np.count_nonzero(in_window)
        counts["node_departures"][j] = np.count_nonzero(q.departures <= T)
        counts["node_in_system"][j] = np.count_nonzero(in_window & (q.departures > T))

        busy = q.busy_until(edges)
        util_series[j] = ewma(np.diff(busy) / np.diff(edges), cfg.ewma_weight)
        queue_series[j] = q.in_system(times)
        b = q.busy_until(batch_edges)
        per_batch = np.diff(b) / np.diff(batch_edges)
        util_avg[j] = (b[-1] - b[0]) / (T - warm)
        util_se[j] = per_batch.std(ddof=1) / np.sqrt(N_BATCHES)
        for i in range(m):
            mine = who == i
            sojourn[i].append((born[mine], q.departures[mine]))

    mean_delay = np.empty(m)
    delay_series = np.empty((m, times.size))
    split = np.empty((m, n))
    messages = np.empty(m, dtype=np.int64)
    for i in range(m):
        born = np.concatenate([s[0] for s in sojourn[i]])
        done = np.concatenate([s[1] for s in sojourn[i]])
        keep = born >= warm
        mean_delay[i] = np.mean(done[keep] - born[keep])
        order = np.argsort(done, kind="stable")
        done_sorted = done[order]
        cum = np.concatenate([[0.0], np.cumsum((done - born)[order])])
        k = np.searchsorted(done_sorted, times, side="right")
        with np.errstate(invalid="ignore", divide="ignore"):
            delay_series[i] = np.where(k > 0, cum[k] / k, np.nan)
        routed = src_route[i][src_time[i] >= warm]
        messages[i] = src_time[i].size
        split[i] = np.bincount(routed, minlength=n) / routed.size

    return SimReport(
        sample_times=times,
        node_util_series=util_series,
        node_queue_series=queue_series,
        node_util_timeavg=util_avg,
        node_util_stderr=util_se,
        persource_mean_delay=mean_delay,
        persource_delay_series=delay_series,
        empirical_split=split,
        messages=messages,
        counts=counts,
    )

