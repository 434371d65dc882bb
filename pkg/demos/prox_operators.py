"""
Proximal operators and their optimality certificate
===================================================

Each nonsmooth term has a closed-form proximal map.  The certificate
checks the subgradient condition ``(u - z)/gamma in d omega(z)`` for a
claimed output ``z`` without re-solving anything.
"""

import numpy as np

from rapm.prox import Box, L1Ball, L1Norm, Zero, certify_prox, prox

u = np.array([2.0, -0.5, 0.0])

# soft-thresholding: shrink by gamma * weight, exact zeros inside the dead zone
print("l1 norm     ", prox(L1Norm(1.0), u, 1.0))

# indicators ignore gamma: they are plain Euclidean projections
print("l1 ball     ", prox(L1Ball(1.0), np.array([2.0, 1.0]), 0.1))
print("unit box    ", prox(Box.unit(3), np.array([-0.3, 0.5, 2.0]), 10.0))
print("zero        ", prox(Zero(), u, 0.5))

# a correct projection passes, a nearby wrong point does not
for z in ([1.0, 0.0], [0.9, 0.0]):
    r = certify_prox(L1Ball(1.0), np.array([2.0, 1.0]), np.array(z), 1.0)
    print(f"certify z={z}: passed={r.passed} margin={r.margin:+.3e}")
