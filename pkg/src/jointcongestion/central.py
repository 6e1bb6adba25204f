"""Centralized system-optimal routing and KKT (Wardrop-type) certification."""
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, Infeasible, MaxItersExceeded
from .model import (
    check_feasible,
    gradient,
    objective,
    persource_mean_delay,
)
from .trace import Trace


@dataclass(frozen=True)
class CentralConfig:
    max_iters: int = 5000
    grad_tol: float = 1e-7
    step_init: float = 1.0
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.grad_tol > 0 or not self.step_init > 0:
            raise ValueError("tolerances and step must be positive")
        if not 0 < self.backtrack_factor < 1 or not 0 < self.armijo_c < 1:
            raise ValueError("backtrack_factor and armijo_c must lie in (0, 1)")


def project_row_simplex(v, total, upper):
    """Euclidean projection of ``v`` onto ``{0 <= x <= upper, sum(x) = total}``.

    The projection is ``clip(v - tau, 0, upper)`` for the unique shift
    ``tau`` that meets the sum; ``tau`` is found exactly from the sorted
    breakpoints of the piecewise-linear sum.
    """
    v = np.asarray(v, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(upper < 0):
        raise ValueError("upper bounds must be nonnegative")
    cap = upper.sum()
    if cap < total - 1e-12 * max(1.0, total):
        raise Infeasible(f"upper bounds sum to {cap!r} < total {total!r}")
    if total <= 0:
        return np.zeros_like(v)
    if total >= cap:
        return upper.copy()

    def mass(tau):
        return np.clip(v - tau, 0.0, upper).sum()

    knots = np.unique(np.concatenate([v - upper, v]))
    masses = np.array([mass(t) for t in knots])  # nonincreasing
    k = np.searchsorted(-masses, -total, side="right")
    if k == 0:
        tau = knots[0]
    elif k == len(knots):
        tau = knots[-1]
    else:
        t0, t1 = knots[k - 1], knots[k]
        f0, f1 = masses[k - 1], masses[k]
        tau = t0 if f0 == f1 else t0 + (f0 - total) * (t1 - t0) / (f0 - f1)
    x = np.clip(v - tau, 0.0, upper)
    # absorb rounding in the sum on coordinates strictly inside their box
    free = (x > 0) & (x < upper)
    if free.any():
        x[free] += (total - x.sum()) / free.sum()
        x = np.clip(x, 0.0, upper)
    return x


def _project_rows(y, lam, upper):
    return np.array([project_row_simplex(y[i], lam[i], upper[i]) for i in range(len(lam))])


def project_feasible(inst, y, max_iter=500, tol=1e-13):
    """Projection onto per-source capped simplices intersected with node caps.

    Rows alone are projected exactly. When that breaks a node cap, Dykstra's
    alternating projection runs between the row set and the column
    half-spaces. Returns ``None`` if the node caps cannot be met.
    """
    lam, upper, caps = inst.lam, inst.path_caps, inst.node_caps
    x = _project_rows(y, lam, upper)
    if np.all(x.sum(axis=0) <= caps):
        return x
    m = len(lam)
    z = y.copy()
    p = np.zeros_like(z)
    q = np.zeros_like(z)
    for _ in range(max_iter):
        x = _project_rows(z + p, lam, upper)
        p = z + p - x
        w = x + q
        excess = np.clip(w.sum(axis=0) - caps, 0.0, None)
        z_new = w - excess[None, :] / m
        q = w - z_new
        if np.max(np.abs(z_new - z)) <= tol:
            z = z_new
            break
        z = z_new
    x = _project_rows(z, lam, upper)
    over = x.sum(axis=0) - caps
    if np.any(over > 1e-12 * np.maximum(1.0, caps)):
        return None
    return x


def initial_feasible(inst, max_passes=100):
    """Strictly feasible starting routing.

    Fills each row in proportion to a share of residual capacity, then
    repairs path and node violations for up to ``max_passes`` passes. The
    fill is first attempted against shrunken capacities so the start sits
    away from every pole. A linear program is the last resort; if it also
    fails, :class:`Infeasible` names the blocking constraint.
    """
    lam = inst.lam
    upper, caps = inst.path_caps, inst.node_caps
    room = np.clip(upper, 0.0, None).sum(axis=1)
    short = np.flatnonzero(room < lam)
    if short.size:
        i = short[0]
        raise Infeasible(f"source {i}: sum of mu_ij - eps is {room[i]!r} < {lam[i]!r}")
    if lam.sum() > np.clip(caps, 0.0, None).sum():
        raise Infeasible(
            f"sum of offered rates {lam.sum()!r} exceeds sum of mu_j - eps "
            f"{np.clip(caps, 0.0, None).sum()!r}"
        )
    for frac in (0.5, 0.8, 0.95, 1.0):
        x = _proportional_fill(lam, frac * np.clip(upper, 0, None), frac * np.clip(caps, 0, None), max_passes)
        if x is not None and check_feasible(inst, x, tol=0.0).ok:
            return x
        if x is not None and check_feasible(inst, x).ok:
            return _snap(inst, x)
    return _lp_start(inst)


def _proportional_fill(lam, upper, caps, max_passes):
    if np.any(upper.sum(axis=1) < lam) or lam.sum() > caps.sum():
        return None
    share = caps / np.maximum(upper.sum(axis=0), np.finfo(float).tiny)
    w = upper * np.minimum(share, 1.0)[None, :]
    wsum = w.sum(axis=1, keepdims=True)
    w = np.where(wsum > 0, w, upper)
    x = lam[:, None] * w / w.sum(axis=1, keepdims=True)
    for _ in range(max_passes):
        x = np.minimum(x, upper)
        loads = x.sum(axis=0)
        over = loads > caps
        if over.any():
            x[:, over] *= caps[over] / loads[over]
        loads = x.sum(axis=0)
        deficit = lam - x.sum(axis=1)
        if np.all(np.abs(deficit) <= 1e-13 * lam) and np.all(loads <= caps):
            return x
        slack = np.minimum(upper - x, np.clip(caps - loads, 0.0, None)[None, :])
        ssum = slack.sum(axis=1)
        for i in np.flatnonzero(deficit > 0):
            if ssum[i] > 0:
                # spread this row's deficit; other rows may overfill a node,
                # which the next pass scales back
                x[i] += min(deficit[i], ssum[i]) * slack[i] / ssum[i]
        loads = x.sum(axis=0)
    return None


def _snap(inst, x):
    """Clip to caps and put any row-sum residue on rows' slackest entries."""
    x = np.clip(x, 0.0, inst.path_caps)
    for i in range(inst.m):
        r = inst.lam[i] - x[i].sum()
        room = np.minimum(inst.path_caps[i] - x[i], inst.node_caps - x.sum(axis=0))
        j = int(np.argmax(room if r > 0 else x[i]))
        x[i, j] += r
    return x


def _lp_start(inst):
    # maximise a uniform margin t to every path and node bound
    from scipy.optimize import linprog

    m, n = inst.m, inst.n
    nv = m * n + 1
    c = np.zeros(nv)
    c[-1] = -1.0
    a_eq = np.zeros((m, nv))
    for i in range(m):
        a_eq[i, i * n:(i + 1) * n] = 1.0
    a_ub, b_ub = [], []
    for i in range(m):
        for j in range(n):
            row = np.zeros(nv)
            row[i * n + j] = 1.0
            row[-1] = 1.0
            a_ub.append(row)
            b_ub.append(inst.path_caps[i, j])
    for j in range(n):
        row = np.zeros(nv)
        row[j:m * n:n] = 1.0
        row[-1] = 1.0
        a_ub.append(row)
        b_ub.append(inst.node_caps[j])
    bounds = [(0, None)] * (m * n) + [(None, 1.0 + inst.lam.max())]
    res = linprog(c, A_ub=np.array(a_ub), b_ub=b_ub, A_eq=a_eq, b_eq=inst.lam,
                  bounds=bounds, method="highs")
    if res.status != 0 or res.x[-1] < 0:
        raise Infeasible("no routing meets the row sums with path and node caps (LP)")
    x = res.x[:-1].reshape(m, n)
    x = np.clip(x, 0.0, None)
    x *= (inst.lam / x.sum(axis=1))[:, None]
    rep = check_feasible(inst, x)
    if not rep.ok:
        raise Infeasible("; ".join(rep.violations()))
    return x


@dataclass
class WardropReport:
    """Total-marginal-cost diagnostics of a routing.

    ``marginal[i, j]`` is C_ij + C_j (+ node multiplier when a node sits at
    its cap); ``alpha[i]`` the smallest such cost for source ``i``. A routing
    passes when every used route is within ``tol`` of ``alpha`` and no unused
    route is cheaper by more than ``tol``.
    """

    marginal: np.ndarray
    alpha: np.ndarray
    spread: np.ndarray
    slack: np.ndarray
    used_mask: np.ndarray
    beta: np.ndarray
    capped_mask: np.ndarray
    node_active: np.ndarray
    node_multiplier: np.ndarray
    degenerate: np.ndarray
    complementary: float
    tol: float

    @property
    def passed(self):
        return bool(np.all(self.spread <= self.tol) and np.all(self.slack >= -self.tol))

    def residual(self):
        """Worst violation of the certificate, in delay units."""
        return float(max(self.spread.max(), np.max(np.clip(-self.slack, 0.0, None))))


def wardrop_report(inst, r, use_threshold=None, tol=1e-7):
    """Check equalization of total marginal cost over each source's routes."""
    r = np.asarray(r, dtype=float)
    marginal = gradient(inst, r)
    if use_threshold is None:
        thr = 1e-8 * inst.lam[:, None]
    else:
        thr = np.broadcast_to(np.asarray(use_threshold, dtype=float), (inst.m, 1))
    used = r > thr
    upper = inst.path_caps
    capped = r >= upper - 1e-9 * np.maximum(1.0, upper)
    loads = r.sum(axis=0)
    caps = inst.node_caps
    node_active = loads >= caps - 1e-9 * np.maximum(1.0, caps)
    nu = np.zeros(inst.n)
    if node_active.any():
        nu = _node_multipliers(marginal, used & ~capped, node_active)
    cost = marginal + nu[None, :]

    alpha = np.empty(inst.m)
    spread = np.zeros(inst.m)
    slack = np.full(inst.m, np.inf)
    degenerate = np.zeros(inst.m, dtype=bool)
    for i in range(inst.m):
        free = ~capped[i]
        alpha[i] = cost[i, free].min() if free.any() else cost[i].min()
        dev = cost[i] - alpha[i]
        interior = used[i] & free
        if interior.any():
            spread[i] = np.abs(dev[interior]).max()
        at_cap = used[i] & capped[i]
        if at_cap.any():
            # a capped route may only be cheaper than the level
            spread[i] = max(spread[i], np.clip(dev[at_cap], 0.0, None).max())
        if (~used[i]).any():
            slack[i] = dev[~used[i]].min()
        degenerate[i] = np.count_nonzero(np.abs(dev) <= tol) >= 2
    beta = np.where(used, 0.0, np.clip(cost - alpha[:, None], 0.0, None))
    return WardropReport(
        marginal=cost,
        alpha=alpha,
        spread=spread,
        slack=slack,
        used_mask=used,
        beta=beta,
        capped_mask=capped,
        node_active=node_active,
        node_multiplier=nu,
        degenerate=degenerate,
        complementary=float(np.max(beta * r)),
        tol=tol,
    )


def _node_multipliers(marginal, used, active):
    # least squares for alpha_i - nu_j = M_ij over used routes, nu_j >= 0 only
    # on active nodes
    m, n = marginal.shape
    act = np.flatnonzero(active)
    rows, rhs = [], []
    for i, j in np.argwhere(used):
        row = np.zeros(m + act.size)
        row[i] = 1.0
        k = np.flatnonzero(act == j)
        if k.size:
            row[m + k[0]] = -1.0
        rows.append(row)
        rhs.append(marginal[i, j])
    nu = np.zeros(n)
    if rows:
        sol, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
        nu[act] = np.clip(sol[m:], 0.0, None)
    return nu


def solve_central(inst, cfg=None, x0=None, strict=True):
    """Minimise the flow-weighted delay by projected gradient.

    Steps are Barzilai-Borwein trial lengths shortened by Armijo
    backtracking along the projection arc, so the objective never increases
    across accepted steps. Stops once :func:`wardrop_report` passes at
    ``cfg.grad_tol``. Returns ``(routing, trace)``; raises
    :class:`MaxItersExceeded` (carrying the best iterate) on budget
    exhaustion unless ``strict`` is false.
    """
    cfg = cfg or CentralConfig()
    x = initial_feasible(inst) if x0 is None else np.array(x0, dtype=float)
    fx = objective(inst, x)
    g = gradient(inst, x)
    trace = Trace(mu_node=inst.mu_node.copy())

    def record(k, step):
        loads = x.sum(axis=0)
        trace.append(k, fx, step, loads, inst.node_marginals(loads),
                     persource_mean_delay(inst, x))

    record(0, 0.0)
    step_len = cfg.step_init
    x_prev = g_prev = None
    report = wardrop_report(inst, x, tol=cfg.grad_tol)
    k = 0
    while not report.passed and k < cfg.max_iters:
        k += 1
        if x_prev is not None:
            dx, dg = x - x_prev, g - g_prev
            curv = np.sum(dx * dg)
            step_len = np.sum(dx * dx) / curv if curv > 0 else cfg.step_init
            step_len = min(max(step_len, 1e-14), 1e14)
        t = step_len
        accepted = None
        for _ in range(80):
            y = project_feasible(inst, x - t * g)
            if y is not None:
                try:
                    fy = objective(inst, y)
                except DomainError:
                    fy = np.inf
                decrease = np.sum(g * (y - x))
                if fy <= fx + cfg.armijo_c * decrease:
                    accepted = y, fy
                    break
                # predicted gain below rounding of F: accept any non-increase
                if fy <= fx and -decrease <= 64 * np.finfo(float).eps * abs(fx):
                    accepted = y, fy
                    break
            t *= cfg.backtrack_factor
        if accepted is None:
            break
        y, fy = accepted
        step = float(np.linalg.norm(y - x))
        x_prev, g_prev = x, g
        x, fx = y, fy
        g = gradient(inst, x)
        record(k, step)
        report = wardrop_report(inst, x, tol=cfg.grad_tol)
        if step == 0.0:
            break
    if not report.passed and strict:
        raise MaxItersExceeded(x, trace, report.residual())
    return x, trace
