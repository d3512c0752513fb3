"""Sampling-based falsification of the cost-function assumptions.

The checkers never prove anything; they hunt for violations over random
tuples and report the worst margins.  The quadratic cost shows its exact
constants; a quartic power cost shows the growth constants at work; and the
classic non-convex counterexample |u|^2 - |u|^p + 1 is caught immediately.
"""

import numpy as np

from langot.costs import (
    CostFunction,
    check_assumptions,
    midpoint_convexity_check,
    remark_counterexample,
)

for label, cost in (
    ("quadratic |u|^2/2", CostFunction(kind="quadratic")),
    ("quartic |u|^4", CostFunction(kind="power_sum", coefficients=(1.0,), exponents=(4.0,))),
    ("quadratic + bounded state potential", CostFunction(kind="quadratic", potential_name="bump")),
):
    rep = check_assumptions(cost, n_samples=2000, seed=1)
    print(f"== {label}")
    print("   R grid      :", np.round(rep.r_grid, 2))
    print("   C_{1,R}     :", np.round(rep.c1, 4))
    print("   C_{2,R}     :", np.round(rep.c2, 4))
    print(f"   scaling margin (relative, min over samples): {rep.scaling_margin:+.3e}")
    print(f"   growth margin  (relative, min over samples): {rep.growth_margin:+.3e}"
          f"   with C = {rep.growth_constant:.3g}")
    print(f"   (t,z) modulus estimates: "
          + ", ".join(f"eps={k:g}: {v:.3e}" for k, v in rep.delta_l.items()))
    print(f"   midpoint-convex: {rep.convex}")
    print()

print("== counterexample |u|^2 - |u|^p + 1 (p = 1.5)")
convex, violation = midpoint_convexity_check(remark_counterexample(1.5), dimension=2, seed=1)
print(f"   flagged convex: {convex}   worst midpoint violation: {violation:.4f}")
print("   (the origin is a local maximum, so midpoint convexity fails near u = 0)")
