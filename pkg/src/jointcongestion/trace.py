"""Per-iteration records shared by both solvers, with CSV export."""
import csv
from dataclasses import dataclass, field

import numpy as np


def fmt(x):
    """Round-trippable float text; identical inputs give identical bytes."""
    return repr(float(x))


@dataclass
class Trace:
    """One row per iterate: objective, step, loads, prices, per-source delay.

    ``prices`` holds the advertised prices for the distributed iteration and
    the implied marginal node costs for the centralized solver. ``alpha``
    (per-source dual level) and ``overloaded`` are kept in memory only.
    """

    mu_node: np.ndarray
    iters: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    step_norm: list = field(default_factory=list)
    loads: list = field(default_factory=list)
    prices: list = field(default_factory=list)
    persource_delay: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    overloaded: list = field(default_factory=list)

    def append(self, it, obj, step, loads, prices, delay, alpha=None, overloaded=False):
        if self.iters and it <= self.iters[-1]:
            raise ValueError(f"iteration {it} does not follow {self.iters[-1]}")
        self.iters.append(int(it))
        self.objective.append(float(obj))
        self.step_norm.append(float(step))
        self.loads.append(np.array(loads, dtype=float))
        self.prices.append(None if prices is None else np.array(prices, dtype=float))
        self.persource_delay.append(np.array(delay, dtype=float))
        self.alpha.append(None if alpha is None else np.array(alpha, dtype=float))
        self.overloaded.append(bool(overloaded))

    def __len__(self):
        return len(self.iters)

    def utilization(self):
        return np.array(self.loads) / self.mu_node

    def header(self):
        n = len(self.mu_node)
        m = len(self.persource_delay[0]) if self.persource_delay else 0
        return (
            ["iter", "objective", "step_norm"]
            + [f"util_{j + 1}" for j in range(n)]
            + [f"price_{j + 1}" for j in range(n)]
            + [f"delay_src_{i + 1}" for i in range(m)]
        )

    def rows(self):
        n = len(self.mu_node)
        for k in range(len(self)):
            util = self.loads[k] / self.mu_node
            price = self.prices[k]
            yield (
                [str(self.iters[k]), fmt(self.objective[k]), fmt(self.step_norm[k])]
                + [fmt(u) for u in util]
                + ([""] * n if price is None else [fmt(p) for p in price])
                + [fmt(d) for d in self.persource_delay[k]]
            )

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            w.writerows(self.rows())
