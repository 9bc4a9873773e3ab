"""Aitchison geometry on the simplex.

Mixture weights live on the simplex. The additive log-ratio map sends the
interior of the H-simplex to R^{H-1} (last part as reference), and turns
perturbation and powering into ordinary vector addition and scaling.
"""

import numpy as np

from spmix.simplex import alr, alr_inv, closure, aitchison_inner, perturb, power

rng = np.random.default_rng(0)

# closure rescales positive vectors to sum to one
x = closure([2.0, 1.0, 1.0])
print("closure(2, 1, 1) =", x)

# alr and its inverse
z = alr(x)
print("alr(x) =", z, " back:", alr_inv(z))

# perturbation is vector addition in alr coordinates
y = closure(rng.random(3))
print("alr(x + y) - (alr x + alr y):", alr(perturb(x, y)) - (alr(x) + alr(y)))

# powering is scalar multiplication
print("alr(2 . x) - 2 alr(x):", alr(power(2.0, x)) - 2 * alr(x))

# the inner product is invariant to rescaling either argument
print("<x, y>_a =", aitchison_inner(x, y), "=", aitchison_inner(5 * x, y))

# alr_inv stays finite for huge coordinates
print("alr_inv(800, -800) =", alr_inv(np.array([800.0, -800.0])))
