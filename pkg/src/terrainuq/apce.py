"""Adaptive polynomial chaos with anisotropic basis growth.

The basis starts from the constant term and grows one promotion at a time in
the direction of the candidate carrying the largest variance contribution.
Forward neighbours of the promoted index become candidates once all of their
backward neighbours have been promoted, which keeps the promoted set downward
closed.  A composite rule made of sample-ratio bounds, a stagnation counter
and a target error ends the loop, and the best model seen is returned.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ConfigurationError, ExtensionExhausted, IllPosedLOOError, RankDeficiencyError
from .pce import MultiIndexSet, PceModel, grlex_key, ols_with_loo, regression_matrix
from .stochastic import InputSpace, SampleSet

__all__ = ["ApceConfig", "ApceState", "variance_contribution", "extend_basis", "fit_apce",
           "write_trace"]


# LOO changes below this are float noise, not improvement
_ROUNDOFF = 1e-13


@dataclass(frozen=True)
class ApceConfig:
    max_poly_order: int = 5
    lower_ratio: float = 0.25
    upper_ratio: float = 0.5
    target_error: float = 1e-3
    stagnation_limit: int = 3

    def __post_init__(self):
        if not 0.0 < self.lower_ratio < self.upper_ratio <= 1.0:
            raise ConfigurationError("need 0 < lower_ratio < upper_ratio <= 1")
        if not self.target_error > 0:
            raise ConfigurationError("target_error must be > 0")
        if self.stagnation_limit < 1:
            raise ConfigurationError("stagnation_limit must be >= 1")
        if self.max_poly_order < 0:
            raise ConfigurationError("max_poly_order must be >= 0")

    def replace(self, **changes) -> ApceConfig:
        return replace(self, **changes)


@dataclass
class ApceState:
    old_set: MultiIndexSet
    cand_set: MultiIndexSet
    model: PceModel | None = None
    best_error: float = math.inf
    stagnation_count: int = 0
    iteration: int = 0

    @classmethod
    def initial(cls, n_d: int) -> ApceState:
        return cls(MultiIndexSet(n_d=n_d), MultiIndexSet([(0,) * n_d], n_d))

    def basis(self) -> MultiIndexSet:
        """Current regression basis ``old | cand`` in canonical order."""
        return self.old_set.union(self.cand_set).sorted()


def variance_contribution(model: PceModel) -> np.ndarray:
    """Sum over outputs of squared coefficients, one entry per basis term."""
    return np.sum(np.asarray(model.coeffs) ** 2, axis=1)


def _contrib_lookup(contrib, state):
    if isinstance(contrib, Mapping):
        return {tuple(k): float(v) for k, v in contrib.items()}
    if state.model is None:
        raise ValueError("array contributions need state.model to align them with a basis")
    contrib = np.asarray(contrib, dtype=float)
    if contrib.shape != (len(state.model.basis),):
        raise ValueError("contribution vector length must match the model basis")
    return dict(zip(state.model.basis, contrib))


def _select(cand: MultiIndexSet, values: dict):
    zero = (0,) * cand.n_d
    ranked = [a for a in cand if a != zero] or list(cand)

    # largest contribution first, ties to the smallest graded-lex index
    return min(ranked, key=lambda a: (-values.get(a, 0.0), grlex_key(a)))


def extend_basis(contrib, state: ApceState, cfg: ApceConfig):
    """One anisotropic extension step.

    Parameters
    ----------
    contrib : array or mapping
        Variance contributions, either aligned with ``state.model.basis`` or
        keyed by multi-index.
    state : ApceState
        Not modified; an updated copy is returned.
    cfg : ApceConfig

    Returns
    -------
    delta : MultiIndexSet
        Indices newly admitted to the candidate set.
    new_state : ApceState
    promoted : tuple
        The index moved from the candidate set to the old set.
    """
    if len(state.cand_set) == 0:
        raise ExtensionExhausted("candidate set is empty")
    values = _contrib_lookup(contrib, state)
    best = _select(state.cand_set, values)

    old = MultiIndexSet(state.old_set, state.cand_set.n_d)
    cand = MultiIndexSet(state.cand_set, state.cand_set.n_d)
    cand.remove(best)
    old.add(best)

    delta = MultiIndexSet(n_d=cand.n_d)
    for i in range(len(best)):
        beta = best[:i] + (best[i] + 1,) + best[i + 1:]
        if sum(beta) > cfg.max_poly_order or beta in old or beta in cand:
            continue
        if all(beta[:j] + (beta[j] - 1,) + beta[j + 1:] in old
               for j in range(len(beta)) if beta[j] > 0):
            delta.add(beta)
    cand.extend(delta)
    new_state = replace(state, old_set=old, cand_set=cand)
    return delta, new_state, best


def fit_apce(samples: SampleSet, space: InputSpace, cfg: ApceConfig | None = None) -> PceModel:
    """Adaptive expansion under the composite termination rule.

    The loop fits ``old | cand`` by least squares, scores it with the LOO
    error and extends the basis.  It stops when the next basis would exceed
    ``upper_ratio * N_s`` terms, when the best LOO error has not improved for
    ``stagnation_limit`` fits, or when the LOO error reaches ``target_error``.
    The last two rules only apply once the basis has at least
    ``lower_ratio * N_s`` terms.  The best-LOO model is returned; its
    ``meta`` holds the per-fit trace and the stop reason.
    """
    cfg = cfg or ApceConfig()
    n_s = len(samples)
    if n_s < 4:
        raise ConfigurationError(f"adaptive expansion needs at least 4 samples, got {n_s}")
    q = samples.q
    state = ApceState.initial(space.dim)
    budget = cfg.upper_ratio * n_s
    floor_terms = cfg.lower_ratio * n_s

    best = None
    trace = []
    flags = []
    reason = None
    while True:
        basis = state.basis()
        if len(basis) > budget:
            reason = "upper_ratio"
            break
        try:
            Psi = regression_matrix(basis, samples.xi, space)
            coeffs, errs = ols_with_loo(Psi, q)
        except (RankDeficiencyError, IllPosedLOOError) as exc:
            reason = "ill_posed"
            flags.append(str(exc))
            break
        err = float(np.mean(errs))
        model = PceModel(basis, coeffs, space, err)
        state = replace(state, model=model, iteration=state.iteration + 1)
        if err < state.best_error - _ROUNDOFF:
            state = replace(state, best_error=err, stagnation_count=0)
            best = model
        else:
            state = replace(state, stagnation_count=state.stagnation_count + 1)
        row = {"iteration": state.iteration, "n_terms": len(basis), "loocv_error": err,
               "promoted": "", "delta_size": 0}
        trace.append(row)

        armed = len(basis) >= floor_terms
        if armed and err <= cfg.target_error:
            reason = "target_error"
            break
        if armed and state.stagnation_count >= cfg.stagnation_limit:
            reason = "stagnation"
            break

        contrib = variance_contribution(model)
        promoted = []
        try:
            # promotions that admit nothing leave the basis unchanged, so keep going
            while True:
                delta, state, alpha = extend_basis(contrib, state, cfg)
                promoted.append(alpha)
                if len(delta):
                    break
        except ExtensionExhausted:
            reason = "exhausted"
        row["promoted"] = " ".join("-".join(map(str, a)) for a in promoted)
        row["delta_size"] = len(state.basis()) - len(basis)
        if reason:
            if len(basis) < floor_terms:
                flags.append("candidates exhausted before the lower sample ratio was reached")
            break

    if best is None:
        raise ConfigurationError(
            f"upper_ratio={cfg.upper_ratio} admits no basis term for {n_s} samples")
    best.meta.update({"method": "APCE", "trace": trace, "stop_reason": reason, "flags": flags,
                      "max_total_order": best.basis.max_total_order,
                      "max_interaction_order": best.basis.max_interaction_order,
                      "final_old_set": list(state.old_set)})
    return best


def write_trace(model: PceModel, path):
    """Write the per-fit trace of an adaptive model as CSV."""
    rows = model.meta.get("trace", [])
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "n_terms", "loocv_error", "promoted", "delta_size"])
        for r in rows:
            w.writerow([r["iteration"], r["n_terms"], f"{r['loocv_error']:.9g}", r["promoted"],
                        r["delta_size"]])
