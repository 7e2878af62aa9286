"""Uncertain antenna inputs and the polynomials orthonormal under them.

Run from the repository root::

    python tutorials/02_beta_inputs_and_orthonormal_basis.py

Each antenna parameter is a scaled Beta(3, 3) variable.  The expansion basis
is built from Jacobi polynomials normalised so that E[psi_i psi_j] = delta_ij.
The script checks that property with Gauss-Jacobi quadrature and shows what
a Latin hypercube design looks like in probability space.
"""
import numpy as np
from scipy import special

from terrainuq.stochastic import beta_cdf, lhs_sample, antenna_input_space, univariate_table

space = antenna_input_space("jerslev")
for spec in space:
    print(f"{spec.name:15s} Beta({spec.alpha:g}, {spec.beta:g}) on [{spec.lower:g}, {spec.upper:g}]  "
          f"mean {spec.mean:g}  std {spec.std:.4g}")

spec = space[0]
t, w = special.roots_jacobi(64, spec.beta - 1, spec.alpha - 1)
x = spec.lower + spec.width * (t + 1) / 2
V = univariate_table(6, x, spec)
gram = (V * (w / w.sum())) @ V.T
print(f"\nGram matrix of psi_0..psi_6 under the {spec.name} measure: max |G - I| = "
      f"{np.abs(gram - np.eye(7)).max():.1e}")

xi = lhs_sample(space, 10, seed=3)
u = np.column_stack([beta_cdf(xi[:, d], s) for d, s in enumerate(space)])
print("\nLatin hypercube design mapped back to probabilities (one point per decile in every column):")
print(np.array2string(np.sort(u, axis=0), precision=2, suppress_small=True))
