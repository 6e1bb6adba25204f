"""
Stochastic validation of the fixed point
========================================

Poisson sources, exponential servers: simulate the distributed routing and
compare node utilization, per-source delay and the realised split with the
deterministic model.
"""
import numpy as np

from jointcongestion import SimConfig, paper_shaped_instance, run_distributed, simulate
from jointcongestion.model import persource_mean_delay

inst = paper_shaped_instance()
r = run_distributed(inst).routing

# long enough for about 1e5 messages from the slowest source after warmup
horizon = 1.2e5 / inst.lam.min() / 0.9
rep = simulate(inst, r, SimConfig(horizon=horizon, seed=0))

util = r.sum(axis=0) / inst.mu_node
for j in range(inst.n):
    print(f"node {j + 1}: util sim {rep.node_util_timeavg[j]:.4f} "
          f"+- {rep.node_util_stderr[j]:.4f}, model {util[j]:.4f}")

delay = persource_mean_delay(inst, r)
for i in range(inst.m):
    print(f"source {i + 1}: delay sim {rep.persource_mean_delay[i]:.3f} s, model {delay[i]:.3f} s, "
          f"{rep.messages[i]} messages")

print("max split deviation:", np.abs(rep.empirical_split - r / inst.lam[:, None]).max())
