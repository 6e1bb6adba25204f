"""
Certifying a routing
====================

At an optimum every route a source actually uses has the same total
marginal cost, and no unused route is cheaper. The report checks both.
"""
import numpy as np

from jointcongestion import Instance, solve_central, symmetric_instance, wardrop_report

inst = Instance.mm1([1.0, 0.8], [[3.0, 1.0], [2.0, 2.0]], [2.0, 2.5])
x, _ = solve_central(inst)
rep = wardrop_report(inst, x, tol=1e-6)
print("optimal routing:\n", x)
print("total marginal cost per route:\n", rep.marginal)
print("alpha:", rep.alpha, " spread:", rep.spread, " passed:", rep.passed)

# move a little flow away from the optimum and the certificate fails
y = x.copy()
y[0] += [0.05, -0.05]
bad = wardrop_report(inst, y, tol=1e-6)
print("perturbed: passed", bad.passed, "worst violation", bad.residual())

# a symmetric network splits every source evenly
sym = symmetric_instance(3, 3)
xs, _ = solve_central(sym)
print("symmetric split:\n", np.round(xs, 12))
