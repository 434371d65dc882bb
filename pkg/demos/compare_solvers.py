"""
Comparing bilevel solvers on sparse regression
==============================================

Training least squares over an l1 ball is the lower level; validation
least squares selects among its minimizers.  There is no closed form, so
reference values come from long runs.  This mirrors ``rapm compare`` on a
smaller budget.
"""

import numpy as np

from rapm import SolverConfig, compute_reference, evaluate_trace, make_sparse_regression, solve
from rapm.bench import iterations_to_threshold

p = make_sparse_regression(60, 40, 50, 5, 0.01, 1.0, seed=7)
K = 1000
ref = compute_reference(p, 10 * K)
print(f"reference ({ref.source}, budget {ref.budget}): f* = {ref.f_star:.8f}, hbar* = {ref.h_bar_star:.8f}")

print(f"{'variant':<8} {'subopt':>10} {'infeas':>10} {'to 1e-3':>8}  feasible")
for variant in ("RAPM", "RPM", "aIRG", "BiGSAM"):
    tr = solve(p, SolverConfig(variant=variant, K=K))
    s = evaluate_trace(tr, ref)
    hit = iterations_to_threshold(s["k"], s["subopt"], 1e-3)
    feasible = bool(np.all(np.isfinite(tr.omega)))
    print(f"{variant:<8} {s['subopt'][-1]:>10.2e} {s['infeas'][-1]:>10.2e} {str(hit):>8}  {feasible}")

# BiG-SAM mixes in an unprojected gradient step, so its iterates leave the ball
