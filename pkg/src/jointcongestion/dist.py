"""Distributed pricing-based routing.

Each round, every node turns its aggregate load into a marginal congestion
price and damps it against its previous price; every source then best
responds to the broadcast prices and damps its split. Rounds are
synchronous: all prices are fixed before any source moves.
"""
from dataclasses import dataclass

import numpy as np

from .central import initial_feasible
from .errors import BestResponseInfeasible, NotConverged
from .model import objective_batch, persource_mean_delay
from .trace import Trace


@dataclass(frozen=True)
class DistConfig:
    eta: float = 0.3
    gamma: float = 0.5
    max_iters: int = 400
    rel_tol: float = 1e-7
    schedule: str = "constant"
    decay: float = 0.01

    def __post_init__(self):
        for name in ("eta", "gamma"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v!r}")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.schedule not in ("constant", "diminishing"):
            raise ValueError(f"unknown schedule {self.schedule!r}")

    def steps(self, t):
        """Source and price step sizes for round ``t``."""
        if self.schedule == "constant":
            return self.eta, self.gamma
        k = 1.0 + self.decay * t
        return self.eta / k, self.gamma / k


@dataclass
class DistResult:
    """Outcome of :func:`run_distributed`.

    ``use_threshold`` is the smallest flow the stopping rule can tell apart
    from zero: a route being drained decays by the factor ``1 - eta`` per
    round, so at termination it still carries up to
    ``rel_tol * ||routing|| / eta``. Pass it to
    :func:`~jointcongestion.central.wardrop_report` when certifying.
    """

    routing: np.ndarray
    prices: np.ndarray
    converged: bool
    iters: int
    trace: Trace
    fixed_point_residual: float
    scale: float
    use_threshold: float


def price_cap(inst):
    """Ceiling applied to prices when a node is transiently overloaded."""
    return 1e6 * float(np.max(inst.node_marginals(inst.node_caps * 0.99)))


def node_price(inst, loads):
    """Marginal congestion cost at each node, clamped at :func:`price_cap`."""
    loads = np.asarray(loads, dtype=float)
    pmax = price_cap(inst)
    ok = loads <= inst.node_caps
    with np.errstate(divide="ignore", invalid="ignore"):
        p = inst.node_marginals(np.where(ok, loads, 0.0))
    return np.where(ok, np.minimum(p, pmax), pmax)


def damped_price_update(p, phat, gamma):
    return (1.0 - gamma) * np.asarray(p, dtype=float) + gamma * np.asarray(phat, dtype=float)


def damped_route_update(r, br, eta):
    return (1.0 - eta) * np.asarray(r, dtype=float) + eta * np.asarray(br, dtype=float)


def best_responses(inst, p, rows=None):
    """Optimal split of every source (or of ``rows``) under prices ``p``.

    Solves min sum_j r_ij D_ij(r_ij) + p_j r_ij over the source's capped
    simplex by bisection on the dual level alpha_i: each path carries the
    rate where its marginal access cost equals ``alpha_i - p_j``. Returns
    ``(routing, alpha)``.
    """
    p = np.asarray(p, dtype=float)
    rows = np.arange(inst.m) if rows is None else np.atleast_1d(rows)
    lam = inst.lam[rows]
    upper = np.clip(inst.path_caps[rows], 0.0, None)
    short = upper.sum(axis=1) < lam
    if short.any():
        i = rows[np.argmax(short)]
        raise BestResponseInfeasible(
            f"source {i}: path capacity {upper[np.argmax(short)].sum()!r} < {inst.lam[i]!r}"
        )
    sub = _SubInstance(inst, rows)
    floor = sub.access_marginals(np.zeros_like(upper)) + p[None, :]
    ceil = sub.access_marginals(upper) + p[None, :]
    lo = floor.min(axis=1)
    hi = ceil.max(axis=1)

    def split(alpha):
        x = sub.inverse(alpha[:, None] - p[None, :])
        return np.minimum(x, upper)

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        total = split(mid).sum(axis=1)
        low = total < lam
        lo = np.where(low, mid, lo)
        hi = np.where(low, hi, mid)
        if np.all(hi - lo <= 4 * np.spacing(hi)):
            break
    alpha = 0.5 * (lo + hi)
    x = split(alpha)
    x = np.where(x <= 0.0, 0.0, x)
    # place the bisection residue on interior coordinates
    for _ in range(3):
        resid = lam - x.sum(axis=1)
        free = (x > 0) & (x < upper)
        cnt = free.sum(axis=1)
        adj = np.where(cnt > 0, resid / np.maximum(cnt, 1), 0.0)
        x = np.clip(np.where(free, x + adj[:, None], x), 0.0, upper)
    return x, alpha


class _SubInstance:
    # row-restricted view used by the best-response bisection
    def __init__(self, inst, rows):
        self.inst, self.rows = inst, rows

    def access_marginals(self, x):
        inst = self.inst
        if inst._mm1:
            mu = inst.mu_access[self.rows]
            return mu / (mu - x) ** 2
        out = np.empty_like(x)
        for a, i in enumerate(self.rows):
            for j, f in enumerate(inst.access[i]):
                out[a, j] = f.marginal(x[a, j])
        return out

    def inverse(self, target):
        inst = self.inst
        if inst._mm1:
            mu = inst.mu_access[self.rows]
            with np.errstate(divide="ignore", invalid="ignore"):
                x = mu - np.sqrt(mu / np.maximum(target, 1.0 / mu))
            return np.clip(x, 0.0, None)
        out = np.empty_like(target)
        for a, i in enumerate(self.rows):
            for j, f in enumerate(inst.access[i]):
                t = target[a, j]
                out[a, j] = 0.0 if t <= f.marginal(0.0) else f.inverse_marginal(t)
        return out


def best_response(inst, i, p):
    """Best-response split of source ``i`` under prices ``p``."""
    x, _ = best_responses(inst, p, rows=[i])
    return x[0]


def run_distributed(inst, cfg=None, x0=None, strict=True):
    """Iterate price updates and damped best responses to a fixed point.

    Stops when the Frobenius-norm relative change of the routing drops below
    ``cfg.rel_tol``. Raises :class:`NotConverged` after ``cfg.max_iters``
    rounds unless ``strict`` is false.
    """
    cfg = cfg or DistConfig()
    x = initial_feasible(inst) if x0 is None else np.array(x0, dtype=float)
    loads = x.sum(axis=0)
    p = node_price(inst, loads)
    trace = Trace(mu_node=inst.mu_node.copy())

    def record(t, step, alpha):
        ld = x.sum(axis=0)
        over = bool(np.any(ld > inst.node_caps))
        obj = float(objective_batch(inst, x))
        delay = persource_mean_delay(inst, x) if np.isfinite(obj) else np.full(inst.m, np.inf)
        trace.append(t, obj, step, ld, p, delay, alpha=alpha, overloaded=over)

    record(0, 0.0, None)
    converged = False
    br = x
    t = 0
    eta = cfg.eta
    while t < cfg.max_iters:
        eta, gamma = cfg.steps(t)
        t += 1
        p = damped_price_update(p, node_price(inst, x.sum(axis=0)), gamma)
        br, alpha = best_responses(inst, p)
        x_new = damped_route_update(x, br, eta)
        step = float(np.linalg.norm(x_new - x))
        rel = step / float(np.linalg.norm(x))
        x = x_new
        record(t, step, alpha)
        if rel < cfg.rel_tol:
            converged = True
            break

    loads = x.sum(axis=0)
    price_res = float(np.max(np.abs(p - node_price(inst, loads))))
    br_res = float(np.max(np.abs(x - br)))
    result = DistResult(
        routing=x,
        prices=p,
        converged=converged,
        iters=t,
        trace=trace,
        fixed_point_residual=max(price_res, br_res),
        scale=max(float(np.linalg.norm(x)), float(np.max(p))),
        use_threshold=2.0 * cfg.rel_tol * float(np.linalg.norm(x)) / eta,
    )
    if strict and not converged:
        raise NotConverged(result)
    return result
