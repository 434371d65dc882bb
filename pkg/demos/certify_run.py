"""
Certifying a run inequality by inequality
=========================================

The convergence proof chains three inequalities: a one-step descent
bound, a recursion on the momentum-weighted gaps, and the resulting
``O(1/k^2)`` bound on the regularized objective.  Each is evaluated on
the stored iterates.  Perturbing a single iterate breaks the chain.
"""

import dataclasses

import numpy as np

from rapm import SolverConfig, certify_lemma_chain, make_sparse_regression, rapm_solve
from rapm.oracles import F_eta_value

p = make_sparse_regression(60, 40, 50, 5, 0.01, 1.0, seed=7)
print(f"L_h = {p.lower.lipschitz:.2f}, L_f = {p.upper.lipschitz:.2f}")

tr = rapm_solve(p, SolverConfig(K=100))
print(certify_lemma_chain(tr, p).table())

# fault injection: nudge x_50 by 1e-2 toward the origin (still feasible)
bad = dataclasses.replace(tr, x=tr.x.copy(), F_eta=tr.F_eta.copy())
x = bad.x[50]
bad.x[50] = x - 1e-2 * x / np.linalg.norm(x)
bad.F_eta[50] = F_eta_value(p, tr.eta, bad.x[50])
print()
print(certify_lemma_chain(bad, p).table())
