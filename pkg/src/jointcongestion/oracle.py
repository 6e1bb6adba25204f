"""Brute-force optimum for tiny instances, used as independent ground truth.

Each source's last rate is fixed by its row sum, so an ``m x n`` instance
has ``m * (n - 1)`` free coordinates. The oracle grids the box of free
coordinates, drops infeasible points, keeps the best, then repeatedly
zooms in around it.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionTooLarge, Infeasible
from .model import objective_batch

MAX_FREE_DIMS = 4
MAX_GRID = 10 ** 9  # points per refinement round
CHUNK = 1 << 20


@dataclass(frozen=True)
class OracleConfig:
    grid_points: int = 1000
    refine_rounds: int = 4
    shrink: float = 0.2

    def __post_init__(self):
        if self.grid_points < 11:
            raise ValueError("grid_points must be >= 11")
        if self.refine_rounds < 1:
            raise ValueError("refine_rounds must be >= 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")


def _assemble(inst, free):
    # free: (k, m*(n-1)) -> routings (k, m, n)
    m, n = inst.m, inst.n
    k = free.shape[0]
    x = np.empty((k, m, n))
    x[:, :, :-1] = free.reshape(k, m, n - 1)
    x[:, :, -1] = inst.lam[None, :] - x[:, :, :-1].sum(axis=2)
    return x


def _search_box(inst, lo, hi, g):
    """Best feasible grid point of the box; ties go to the smallest index."""
    d = lo.size
    axes = [np.linspace(lo[k], hi[k], g) for k in range(d)]
    total = g ** d
    best_f, best_x = np.inf, None
    upper = inst.path_caps
    caps = inst.node_caps
    for start in range(0, total, CHUNK):
        idx = np.arange(start, min(start + CHUNK, total))
        sub = np.unravel_index(idx, (g,) * d)
        free = np.stack([axes[k][sub[k]] for k in range(d)], axis=1)
        x = _assemble(inst, free)
        ok = np.all(x >= 0, axis=(1, 2)) & np.all(x <= upper, axis=(1, 2))
        ok &= np.all(x.sum(axis=1) <= caps, axis=1)
        f = np.where(ok, objective_batch(inst, x), np.inf)
        k = int(np.argmin(f))
        if f[k] < best_f:
            best_f, best_x = float(f[k]), x[k]
    return best_x, best_f


def brute_force_optimum(inst, cfg=None):
    """Grid-search minimiser of the objective; returns ``(routing, value)``.

    Per-coordinate accuracy after refinement is about
    ``range * shrink**refine_rounds / grid_points``.
    """
    cfg = cfg or OracleConfig()
    m, n = inst.m, inst.n
    d = m * (n - 1)
    if d > MAX_FREE_DIMS:
        raise DimensionTooLarge(f"{d} free coordinates (limit {MAX_FREE_DIMS})")
    if cfg.grid_points ** d > MAX_GRID:
        raise DimensionTooLarge(
            f"{cfg.grid_points}^{d} grid points per round; lower grid_points"
        )
    if d == 0:
        x = inst.lam.reshape(m, 1).copy()
        f = float(objective_batch(inst, x[None])[0])
        if not np.isfinite(f) or np.any(x > inst.path_caps) or np.any(x.sum(0) > inst.node_caps):
            raise Infeasible("the only routing violates a capacity")
        return x, f
    cap = np.minimum(inst.lam[:, None], np.clip(inst.path_caps[:, :-1], 0.0, None))
    lo0 = np.zeros(d)
    hi0 = cap.reshape(-1)
    x, f = _search_box(inst, lo0, hi0, cfg.grid_points)
    if x is None:
        raise Infeasible("no feasible grid point")
    width = hi0 - lo0
    for _ in range(cfg.refine_rounds):
        width = width * cfg.shrink
        centre = x[:, :-1].reshape(-1)
        lo = np.maximum(centre - width / 2, lo0)
        hi = np.minimum(centre + width / 2, hi0)
        xr, fr = _search_box(inst, lo, hi, cfg.grid_points)
        if xr is not None and fr <= f:
            x, f = xr, fr
    return x, f


def grid_resolution(inst, cfg=None):
    """Per-coordinate spacing of the last refinement grid."""
    cfg = cfg or OracleConfig()
    span = np.minimum(inst.lam[:, None], inst.path_caps[:, :-1]).max()
    return span * cfg.shrink ** cfg.refine_rounds / (cfg.grid_points - 1)
