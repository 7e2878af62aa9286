"""How the adaptive expansion grows its basis.

Run from the repository root::

    python tutorials/03_adaptive_expansion_on_a_toy_function.py

Part one steps the extension rule by hand in two dimensions.  Part two fits
an anisotropic cubic in five inputs and prints the per-fit trace: basis size,
leave-one-out error and the promoted multi-indices.  A total-order-2
expansion with the same samples is shown for contrast; it cannot represent
the cubic term.
"""
import numpy as np

from terrainuq.apce import ApceConfig, ApceState, extend_basis, fit_apce
from terrainuq.pce import MultiIndexSet, fit_standard_pce, regression_matrix
from terrainuq.stochastic import SampleSet, lhs_sample, antenna_input_space

cfg = ApceConfig()
state = ApceState.initial(2)
for contrib in ({}, {(1, 0): 2.0, (0, 1): 1.0}, {(0, 1): 1.0}):
    delta, state, alpha = extend_basis(contrib, state, cfg)
    print(f"promote {alpha}: admit {list(delta)}; candidates now {list(state.cand_set)}")

space = antenna_input_space()
terms = {(1, 0, 0, 0, 0): 1.0, (2, 0, 0, 0, 0): 0.5, (3, 0, 0, 0, 0): 1.0, (0, 1, 0, 0, 0): 0.1}
xi = lhs_sample(space, 40, seed=0)
q = regression_matrix(MultiIndexSet(list(terms)), xi, space) @ np.array(list(terms.values()))
samples = SampleSet(xi, q, 0)

model = fit_apce(samples, space, cfg)
print(f"\n{'fit':>3} {'terms':>5} {'LOO error':>10}  promoted")
for row in model.meta["trace"]:
    print(f"{row['iteration']:3d} {row['n_terms']:5d} {row['loocv_error']:10.2e}  {row['promoted']}")
print(f"stop reason: {model.meta['stop_reason']}; returned {model.n_terms} terms, "
      f"max order {model.basis.max_total_order}, max interaction {model.basis.max_interaction_order}")
print(f"standard order-2 expansion: {fit_standard_pce(samples, space, 2).loocv_error:.2e} LOO error")
