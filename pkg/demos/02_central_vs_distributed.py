"""
Centralized optimum against distributed pricing
===============================================

Solve the bundled 5x3 instance both ways and line up the results.
"""
import numpy as np

from jointcongestion import DistConfig, objective, paper_shaped_instance, run_distributed, solve_central
from jointcongestion.experiments import compare

inst = paper_shaped_instance()
print("offered rates (MB/s):", inst.lam)

# projected gradient with backtracking; the objective never goes up
x_central, trace = solve_central(inst)
print(f"central: F = {objective(inst, x_central):.9f} after {len(trace) - 1} iterations")

# nodes post prices, sources best respond and damp their move
res = run_distributed(inst, DistConfig(eta=0.3, gamma=0.5))
print(f"distributed: F = {objective(inst, res.routing):.9f} after {res.iters} rounds")
print("node prices:", np.round(res.prices, 4))

# utilization per node from both solvers
rep = compare(inst)
print(rep.summary())

# the price trajectory is in the trace, one row per round
prices = np.array(res.trace.prices)
print("first and last price vectors:\n", prices[[0, -1]])
