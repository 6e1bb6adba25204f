"""Solver comparison and the CSV/summary files behind each figure and table."""
import csv
import json
import platform
from dataclasses import dataclass

import numpy as np

from . import __version__
from .central import CentralConfig, solve_central, wardrop_report
from .dist import DistConfig, run_distributed
from .errors import ParseError
from .model import objective, persource_mean_delay
from .trace import fmt


@dataclass
class ComparisonReport:
    f_central: float
    f_dist: float
    abs_gap: float
    rel_gap: float
    util_central: np.ndarray
    util_dist: np.ndarray
    max_routing_diff: float
    wardrop_central: object
    wardrop_dist: object
    routing_central: np.ndarray
    routing_dist: np.ndarray
    trace_central: object
    dist: object

    def summary(self):
        lines = [
            f"F_central          {self.f_central:.9g}",
            f"F_dist             {self.f_dist:.9g}",
            f"absolute gap       {self.abs_gap:.3e}",
            f"relative gap       {self.rel_gap:.3e}",
            f"max |routing diff| {self.max_routing_diff:.3e}",
            f"central iterations {len(self.trace_central) - 1}",
            f"dist iterations    {self.dist.iters} (converged: {self.dist.converged})",
            "Wardrop central    " + _verdict(self.wardrop_central),
            "Wardrop dist       " + _verdict(self.wardrop_dist),
            "",
            "solver        " + "  ".join(f"util_{j + 1:<5d}" for j in range(self.util_central.size)),
            "central_flow  " + "  ".join(f"{u:<10.3f}" for u in self.util_central),
            "dist_flow     " + "  ".join(f"{u:<10.3f}" for u in self.util_dist),
        ]
        return "\n".join(lines) + "\n"


def _verdict(rep):
    word = "pass" if rep.passed else "FAIL"
    return f"{word} (spread {rep.spread.max():.2e}, tol {rep.tol:.0e})"


def compare(inst, central_cfg=None, dist_cfg=None, kkt_tol=1e-4):
    """Run both solvers on ``inst`` and line up their results."""
    central_cfg = central_cfg or CentralConfig()
    dist_cfg = dist_cfg or DistConfig()
    xc, trace_c = solve_central(inst, central_cfg)
    res = run_distributed(inst, dist_cfg, strict=False)
    fc, fd = objective(inst, xc), objective(inst, res.routing)
    return ComparisonReport(
        f_central=fc,
        f_dist=fd,
        abs_gap=fd - fc,
        rel_gap=(fd - fc) / abs(fc),
        util_central=xc.sum(axis=0) / inst.mu_node,
        util_dist=res.routing.sum(axis=0) / inst.mu_node,
        max_routing_diff=float(np.max(np.abs(xc - res.routing))),
        wardrop_central=wardrop_report(inst, xc, tol=central_cfg.grad_tol),
        wardrop_dist=wardrop_report(inst, res.routing, use_threshold=res.use_threshold,
                                    tol=kkt_tol),
        routing_central=xc,
        routing_dist=res.routing,
        trace_central=trace_c,
        dist=res,
    )


def _writer(path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_routing(path, r):
    r = np.asarray(r, dtype=float)
    fh, w = _writer(path)
    with fh:
        w.writerow(["source"] + [f"node_{j + 1}" for j in range(r.shape[1])])
        for i, row in enumerate(r):
            w.writerow([i + 1] + [fmt(v) for v in row])


def read_routing(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        return np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    except (OSError, ValueError, IndexError) as e:
        raise ParseError(f"{path}: cannot read routing ({e})") from None


def write_wardrop(path, inst, r, rep):
    """Total marginal cost of every route, the data behind the KKT plot."""
    fh, w = _writer(path)
    with fh:
        w.writerow(["source", "node", "rate", "marginal_total", "alpha", "used"])
        for i in range(inst.m):
            for j in range(inst.n):
                w.writerow([i + 1, j + 1, fmt(r[i, j]), fmt(rep.marginal[i, j]),
                            fmt(rep.alpha[i]), int(rep.used_mask[i, j])])


def write_utilization_table(path, rows):
    fh, w = _writer(path)
    with fh:
        n = len(next(iter(rows.values())))
        w.writerow(["solver"] + [f"util_{j + 1}" for j in range(n)])
        for name, util in rows.items():
            w.writerow([name] + [fmt(u) for u in util])


def write_sim(out_dir, inst, r, rep):
    """Time series and summaries of a simulation run."""
    out_dir.mkdir(parents=True, exist_ok=True)
    util_det = np.asarray(r).sum(axis=0) / inst.mu_node
    fh, w = _writer(out_dir / "sim_timeseries.csv")
    with fh:
        w.writerow(["time", "node", "ewma_util", "queue_len"])
        for k, t in enumerate(rep.sample_times):
            for j in range(inst.n):
                w.writerow([fmt(t), j + 1, fmt(rep.node_util_series[j, k]),
                            int(rep.node_queue_series[j, k])])
    fh, w = _writer(out_dir / "sim_util_summary.csv")
    with fh:
        w.writerow(["node", "util_timeavg", "util_det"])
        for j in range(inst.n):
            w.writerow([j + 1, fmt(rep.node_util_timeavg[j]), fmt(util_det[j])])
    fh, w = _writer(out_dir / "sim_split_summary.csv")
    with fh:
        w.writerow(["source", "node", "split_emp", "split_det"])
        for i in range(inst.m):
            for j in range(inst.n):
                w.writerow([i + 1, j + 1, fmt(rep.empirical_split[i, j]),
                            fmt(r[i, j] / inst.lam[i])])
    delay_det = persource_mean_delay(inst, r)
    fh, w = _writer(out_dir / "sim_delay_summary.csv")
    with fh:
        w.writerow(["source", "delay_emp", "delay_det", "messages"])
        for i in range(inst.m):
            w.writerow([i + 1, fmt(rep.persource_mean_delay[i]), fmt(delay_det[i]),
                        int(rep.messages[i])])
    fh, w = _writer(out_dir / "sim_delay_timeseries.csv")
    with fh:
        w.writerow(["time", "source", "mean_delay"])
        for k, t in enumerate(rep.sample_times):
            for i in range(inst.m):
                w.writerow([fmt(t), i + 1, fmt(rep.persource_delay_series[i, k])])


def write_manifest(path, command, config):
    """Everything needed to rerun a command; deliberately no timestamps."""
    data = {
        "command": command,
        "config": config,
        "versions": {
            "jointcongestion": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
