"""Problem data, delay functions, objective and gradient.

Rates are in any consistent unit (the bundled instances use MB/s); delays
are in the reciprocal unit. A routing is a plain ``(m, n)`` float array
whose entry ``[i, j]`` is the rate source ``i`` sends to node ``j``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    InfeasibleInstance,
    NodePoleError,
    PathPoleError,
    ValidationError,
)

# message rate (msg/s), mean message size (bytes)
TRAFFIC_CLASSES = {
    1: (50.0, 2_000.0),
    2: (30.0, 2_000.0),
    3: (15.0, 2_000_000.0),
    4: (10.0, 1_000.0),
}
BYTES_PER_MB = 1e6

FEASIBILITY_TOL = 1e-9
EPS_FRACTION = 1e-6


class DelayFunction:
    """Convex, strictly increasing delay with a pole at ``capacity``.

    ``value`` and ``derivative`` must accept numpy arrays. Subclasses may
    override :meth:`inverse_marginal` with a closed form; the default uses
    bisection.
    """

    kind = "custom"

    def __init__(self, capacity, value=None, derivative=None):
        capacity = float(capacity)
        if not capacity > 0 or not np.isfinite(capacity):
            raise ValidationError(f"capacity must be positive, got {capacity!r}")
        self.capacity = capacity
        self._value = value
        self._derivative = derivative

    def __repr__(self):
        return f"{type(self).__name__}(capacity={self.capacity!r})"

    def value(self, x):
        return self._value(x)

    def derivative(self, x):
        return self._derivative(x)

    def marginal(self, x):
        """d/dx [x * D(x)] = D(x) + x D'(x)."""
        return self.value(x) + x * self.derivative(x)

    def inverse_marginal(self, target):
        return bisect_inverse_marginal(self, target)


class MM1Delay(DelayFunction):
    """Mean M/M/1 sojourn time ``1 / (mu - x)``."""

    kind = "mm1"

    def __init__(self, capacity):
        super().__init__(capacity)

    def value(self, x):
        return 1.0 / (self.capacity - x)

    def derivative(self, x):
        return 1.0 / (self.capacity - x) ** 2

    def second_derivative(self, x):
        return 2.0 / (self.capacity - x) ** 3

    def marginal(self, x):
        return self.capacity / (self.capacity - x) ** 2

    def inverse_marginal(self, target):
        mu = self.capacity
        return mu - np.sqrt(mu / np.asarray(target, dtype=float))


def bisect_inverse_marginal(f, target, xtol=1e-12, max_iter=200):
    """Solve ``f.marginal(x) = target`` on ``[0, capacity)`` by bisection.

    Works elementwise on array targets. Targets below ``f.marginal(0)`` map
    to 0; the caller decides whether that means "route unused".
    """
    target = np.asarray(target, dtype=float)
    lo = np.zeros_like(target)
    hi = np.full_like(target, f.capacity)
    tol = max(xtol, 4 * np.spacing(f.capacity))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(max_iter):
            if np.all(hi - lo <= tol):
                break
            mid = 0.5 * (lo + hi)
            c = f.marginal(mid)
            below = np.isfinite(c) & (c < target)
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
    x = 0.5 * (lo + hi)
    return np.where(target <= f.marginal(0.0), 0.0, x)


def _check_domain(f, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x >= f.capacity) or np.any(np.isnan(x)):
        raise DomainError(f"rate {x!r} outside [0, {f.capacity!r})")
    return x


def delay_value(f, x):
    """Delay ``D(x)``; raises :class:`DomainError` off ``[0, capacity)``."""
    x = _check_domain(f, x)
    return _scalar(f.value(x))


def marginal_cost(f, x):
    """Marginal flow-weighted delay ``D(x) + x D'(x)``."""
    x = _check_domain(f, x)
    return _scalar(f.marginal(x))


def inverse_marginal_cost(f, target):
    """Rate at which the marginal cost of ``f`` equals ``target``.

    Raises :class:`DomainError` when ``target < marginal_cost(f, 0)``.
    """
    target = np.asarray(target, dtype=float)
    floor = f.marginal(0.0)
    if np.any(target < floor):
        raise DomainError(
            f"target {target!r} below the zero-load marginal cost {floor!r}"
        )
    x = np.clip(f.inverse_marginal(target), 0.0, f.capacity)
    return _scalar(x)


def _scalar(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


@dataclass(eq=False)
class Instance:
    """Sources with offered rates, per-path and per-node delay functions.

    ``access[i][j]`` is the delay on the path from source ``i`` to node
    ``j``; ``node[j]`` is the delay at node ``j``. ``eps`` is the margin kept
    from every capacity. With ``check=True`` the necessary feasibility
    conditions are verified at construction.
    """

    lam: np.ndarray
    access: tuple
    node: tuple
    eps: float = None
    labels: dict = None
    origin: dict = field(default=None, repr=False)
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.lam = np.array(self.lam, dtype=float).reshape(-1)
        self.access = tuple(tuple(row) for row in self.access)
        self.node = tuple(self.node)
        m, n = self.lam.size, len(self.node)
        if m == 0 or n == 0:
            raise ValidationError("instance needs at least one source and one node")
        if len(self.access) != m or any(len(row) != n for row in self.access):
            raise ValidationError(f"access grid must be {m}x{n}")
        for i, v in enumerate(self.lam):
            if not v > 0 or not np.isfinite(v):
                raise ValidationError(f"lambda[{i}] must be positive, got {v!r}")
        self.mu_access = np.array([[f.capacity for f in row] for row in self.access])
        self.mu_node = np.array([f.capacity for f in self.node])
        if self.eps is None:
            self.eps = EPS_FRACTION * min(self.mu_access.min(), self.mu_node.min())
        self.eps = float(self.eps)
        if not self.eps > 0:
            raise ValidationError(f"eps must be positive, got {self.eps!r}")
        self._mm1 = all(isinstance(f, MM1Delay) for f in self.node) and all(
            isinstance(f, MM1Delay) for row in self.access for f in row
        )
        if self.check:
            self.require_feasible()

    @classmethod
    def mm1(cls, lam, mu_access, mu_node, eps=None, **kw):
        """Instance whose every delay is M/M/1 with the given capacities."""
        mu_access = np.atleast_2d(np.asarray(mu_access, dtype=float))
        for (i, j), mu in np.ndenumerate(mu_access):
            if not mu > 0:
                raise ValidationError(f"mu_access[{i}][{j}] must be positive, got {mu!r}")
        for j, mu in enumerate(np.asarray(mu_node, dtype=float).reshape(-1)):
            if not mu > 0:
                raise ValidationError(f"mu_node[{j}] must be positive, got {mu!r}")
        access = [[MM1Delay(mu) for mu in row] for row in mu_access]
        node = [MM1Delay(mu) for mu in np.asarray(mu_node, dtype=float).reshape(-1)]
        return cls(lam, access, node, eps, **kw)

    @property
    def m(self):
        return self.lam.size

    @property
    def n(self):
        return self.mu_node.size

    @property
    def path_caps(self):
        return self.mu_access - self.eps

    @property
    def node_caps(self):
        return self.mu_node - self.eps

    def require_feasible(self):
        """Raise :class:`InfeasibleInstance` if a necessary condition fails."""
        room = np.clip(self.path_caps, 0.0, None).sum(axis=1)
        for i in range(self.m):
            if room[i] < self.lam[i]:
                raise InfeasibleInstance(
                    f"source {i}: path capacity {room[i]!r} < offered rate {self.lam[i]!r}"
                )
        total_room = np.clip(self.node_caps, 0.0, None).sum()
        if self.lam.sum() > total_room:
            raise InfeasibleInstance(
                f"total offered rate {self.lam.sum()!r} exceeds node capacity {total_room!r}"
            )

    # Vectorised evaluation over a trailing (m, n) or (n,) axis. No domain
    # checks: callers screen for poles first.

    def access_values(self, x):
        if self._mm1:
            return 1.0 / (self.mu_access - x)
        return self._grid(x, "value")

    def access_marginals(self, x):
        if self._mm1:
            return self.mu_access / (self.mu_access - x) ** 2
        return self._grid(x, "marginal")

    def node_values(self, loads):
        if self._mm1:
            return 1.0 / (self.mu_node - loads)
        return self._row(loads, "value")

    def node_marginals(self, loads):
        if self._mm1:
            return self.mu_node / (self.mu_node - loads) ** 2
        return self._row(loads, "marginal")

    def _grid(self, x, method):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for i, row in enumerate(self.access):
            for j, f in enumerate(row):
                out[..., i, j] = getattr(f, method)(x[..., i, j])
        return out

    def _row(self, loads, method):
        loads = np.asarray(loads, dtype=float)
        out = np.empty_like(loads)
        for j, f in enumerate(self.node):
            out[..., j] = getattr(f, method)(loads[..., j])
        return out


def aggregate_loads(r):
    """Per-node aggregate rate (column sums of the routing)."""
    return np.asarray(r, dtype=float).sum(axis=-2)


def _require_strict(inst, r):
    r = np.asarray(r, dtype=float)
    if r.shape != (inst.m, inst.n):
        raise ValidationError(f"routing shape {r.shape} != {(inst.m, inst.n)}")
    if np.any(r < 0):
        i, j = np.argwhere(r < 0)[0]
        raise DomainError(f"negative rate {r[i, j]!r} on path ({i}, {j})")
    over = r >= inst.mu_access
    if over.any():
        i, j = np.argwhere(over)[0]
        raise PathPoleError(i, j, r[i, j], inst.mu_access[i, j])
    loads = r.sum(axis=0)
    over = loads >= inst.mu_node
    if over.any():
        j = int(np.argmax(over))
        raise NodePoleError(j, loads[j], inst.mu_node[j])
    return r, loads


def objective(inst, r):
    """Flow-weighted end-to-end delay in separable form.

    sum_ij r_ij D_ij(r_ij) + sum_j L_j D_j(L_j)
    """
    r, loads = _require_strict(inst, r)
    return float(
        np.sum(r * inst.access_values(r)) + np.sum(loads * inst.node_values(loads))
    )


def objective_composed(inst, r):
    """Same objective summed path by path: sum_ij r_ij (D_ij + D_j)."""
    r, loads = _require_strict(inst, r)
    per_path = inst.access_values(r) + inst.node_values(loads)[None, :]
    return float(np.sum(r * per_path))


def objective_batch(inst, x):
    """Objective over a stack of routings ``(..., m, n)``; ``inf`` at poles."""
    x = np.asarray(x, dtype=float)
    loads = x.sum(axis=-2)
    ok = np.all(x < inst.mu_access, axis=(-2, -1)) & np.all(loads < inst.mu_node, axis=-1)
    ok &= np.all(x >= 0, axis=(-2, -1))
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.sum(x * inst.access_values(x), axis=(-2, -1)) + np.sum(
            loads * inst.node_values(loads), axis=-1
        )
    return np.where(ok, f, np.inf)


def gradient(inst, r):
    """Partial derivatives C_ij(r_ij) + C_j(L_j), shape ``(m, n)``."""
    r, loads = _require_strict(inst, r)
    return inst.access_marginals(r) + inst.node_marginals(loads)[None, :]


def persource_mean_delay(inst, r):
    """Flow-weighted mean end-to-end delay seen by each source."""
    r, loads = _require_strict(inst, r)
    per_path = inst.access_values(r) + inst.node_values(loads)[None, :]
    return np.sum(r * per_path, axis=1) / inst.lam


def utilization(inst, r):
    return aggregate_loads(r) / inst.mu_node


@dataclass
class FeasibilityReport:
    """Constraint residuals of a routing; ``ok`` iff all are within ``tol``."""

    row_residual: np.ndarray
    negative: np.ndarray
    path_excess: np.ndarray
    node_excess: np.ndarray
    tol: float

    @property
    def ok(self):
        return (
            np.all(np.abs(self.row_residual) <= self.tol)
            and np.all(self.negative <= self.tol)
            and np.all(self.path_excess <= self.tol)
            and np.all(self.node_excess <= self.tol)
        )

    def violations(self):
        out = []
        for i in np.flatnonzero(np.abs(self.row_residual) > self.tol):
            out.append(f"row {i} sum off by {self.row_residual[i]:.3e}")
        for i, j in np.argwhere(self.negative > self.tol):
            out.append(f"path ({i}, {j}) negative by {self.negative[i, j]:.3e}")
        for i, j in np.argwhere(self.path_excess > self.tol):
            out.append(f"path ({i}, {j}) over mu-eps by {self.path_excess[i, j]:.3e}")
        for j in np.flatnonzero(self.node_excess > self.tol):
            out.append(f"node {j} over mu-eps by {self.node_excess[j]:.3e}")
        return out


def check_feasible(inst, r, tol=FEASIBILITY_TOL):
    r = np.asarray(r, dtype=float)
    if r.shape != (inst.m, inst.n):
        raise ValidationError(f"routing shape {r.shape} != {(inst.m, inst.n)}")
    return FeasibilityReport(
        row_residual=r.sum(axis=1) - inst.lam,
        negative=np.clip(-r, 0.0, None),
        path_excess=np.clip(r - inst.path_caps, 0.0, None),
        node_excess=np.clip(r.sum(axis=0) - inst.node_caps, 0.0, None),
        tol=tol,
    )


def traffic_class_rates(classes, table=None):
    """Aggregate rate (MB/s) of a set of traffic classes.

    >>> round(traffic_class_rates([2, 4]), 12)
    0.07
    """
    table = TRAFFIC_CLASSES if table is None else table
    total = 0.0
    for c in classes:
        try:
            msgs, size = table[int(c)]
        except (KeyError, ValueError, TypeError):
            raise ValidationError(f"unknown traffic class {c!r}") from None
        total += msgs * size
    return total / BYTES_PER_MB
