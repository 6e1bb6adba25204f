"""
Delay, marginal cost and the flow-weighted objective
====================================================

A single M/M/1 link with capacity 2, then a two-source, two-node network.
"""
import numpy as np

from jointcongestion import (
    Instance, MM1Delay, delay_value, gradient, inverse_marginal_cost,
    marginal_cost, objective, objective_composed,
)

# delay grows without bound as the rate approaches capacity
link = MM1Delay(2.0)
for x in (0.0, 1.0, 1.9, 1.99):
    print(f"rate {x:5.2f}  delay {delay_value(link, x):8.3f}  marginal {marginal_cost(link, x):9.3f}")

# the inverse marginal cost recovers the rate that prices at a given level
print("rate with marginal cost 2:", inverse_marginal_cost(link, 2.0))

# a small network: rows are sources, columns are service nodes
inst = Instance.mm1(lam=[1.0, 0.5], mu_access=[[3.0, 2.0], [1.5, 2.5]], mu_node=[2.5, 2.0])
r = np.array([[0.6, 0.4], [0.2, 0.3]])

# the separable and the per-source forms of the objective agree
print("F separable:", objective(inst, r))
print("F composed: ", objective_composed(inst, r))

# entry (i, j) is the total marginal cost of sending more of source i via node j
print("gradient:\n", gradient(inst, r))
