"""Multi-indices, regression matrices, least-squares and LARS fitting, LOO error.

Everything here is shared by the standard, sparse and adaptive expansions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, IllPosedLOOError, RankDeficiencyError
from .stochastic import InputSpace, SampleSet, univariate_table

__all__ = [
    "MultiIndex",
    "MultiIndexSet",
    "PceModel",
    "grlex_key",
    "total_order_set",
    "total_order_size",
    "regression_matrix",
    "ols_fit",
    "loocv_error",
    "ols_with_loo",
    "fit_standard_pce",
    "fit_sparse_pce",
]

MultiIndex = tuple  # tuple of non-negative ints


def grlex_key(index: Sequence[int]):
    """Sort key of the canonical graded-lexicographic order.

    Lower total order first; within one order, larger leading entries first,
    e.g. ``(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)``.
    """
    return (sum(index),) + tuple(-k for k in index)


def _as_index(index) -> MultiIndex:
    out = tuple(int(k) for k in index)
    if any(k < 0 for k in out):
        raise ValueError(f"multi-index entries must be >= 0, got {out}")
    return out


class MultiIndexSet:
    """Ordered, duplicate-free collection of multi-indices (insertion order)."""

    def __init__(self, indices: Iterable = (), n_d: int | None = None):
        self._items: list = []
        self._lookup: dict = {}
        self.n_d = n_d
        for idx in indices:
            self.add(idx)

    def add(self, index) -> bool:
        """Append ``index``; returns False if it was already present."""
        index = _as_index(index)
        if self.n_d is None:
            self.n_d = len(index)
        elif len(index) != self.n_d:
            raise ValueError(f"multi-index {index} does not have length {self.n_d}")
        if index in self._lookup:
            return False
        self._lookup[index] = len(self._items)
        self._items.append(index)
        return True

    def extend(self, indices):
        for idx in indices:
            self.add(idx)

    def remove(self, index):
        index = _as_index(index)
        pos = self._lookup.pop(index)
        del self._items[pos]
        for k in range(pos, len(self._items)):
            self._lookup[self._items[k]] = k

    def position(self, index) -> int:
        return self._lookup[_as_index(index)]

    def __contains__(self, index):
        return tuple(index) in self._lookup

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i]

    def __eq__(self, other):
        if isinstance(other, MultiIndexSet):
            return self._items == other._items
        return NotImplemented

    def __repr__(self):
        return f"MultiIndexSet({self._items!r})"

    def sorted(self) -> MultiIndexSet:
        return MultiIndexSet(sorted(self._items, key=grlex_key), self.n_d)

    def union(self, other) -> MultiIndexSet:
        out = MultiIndexSet(self._items, self.n_d)
        out.extend(other)
        return out

    def as_array(self) -> np.ndarray:
        if not self._items:
            return np.zeros((0, self.n_d or 0), dtype=int)
        return np.array(self._items, dtype=int)

    @property
    def max_total_order(self) -> int:
        return max((sum(i) for i in self._items), default=0)

    @property
    def max_interaction_order(self) -> int:
        return max((sum(k > 0 for k in i) for i in self._items), default=0)

    def is_downward_closed(self) -> bool:
        for idx in self._items:
            for j, k in enumerate(idx):
                if k > 0 and idx[:j] + (k - 1,) + idx[j + 1:] not in self._lookup:
                    return False
        return True


def total_order_size(n_d: int, max_order: int) -> int:
    """``(n_d + max_order)! / (n_d! max_order!)``."""
    return math.comb(n_d + max_order, max_order)


def total_order_set(n_d: int, max_order: int) -> MultiIndexSet:
    """All multi-indices with total order at most ``max_order``, graded-lex ordered."""
    if n_d < 1 or max_order < 0:
        raise ValueError("need n_d >= 1 and max_order >= 0")
    out = []
    for order in range(max_order + 1):
        for combo in combinations_with_replacement(range(n_d), order):
            idx = [0] * n_d
            for d in combo:
                idx[d] += 1
            out.append(tuple(idx))
    out.sort(key=grlex_key)
    return MultiIndexSet(out, n_d)


def regression_matrix(basis: MultiIndexSet, xi, space: InputSpace) -> np.ndarray:
    """Matrix with entries ``psi_j(xi_i)``, shape ``(N_s, N_p)``."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if xi.shape[1] != space.dim:
        raise ValueError(f"samples have {xi.shape[1]} columns, input space has {space.dim}")
    A = basis.as_array()
    if A.shape[1] != space.dim:
        raise ValueError("basis dimension does not match input space")
    Psi = np.ones((xi.shape[0], A.shape[0]))
    for d, spec in enumerate(space):
        top = int(A[:, d].max()) if A.size else 0
        if top == 0:
            continue
        table = univariate_table(top, xi[:, d], spec)  # (top+1, N_s)
        Psi *= table[A[:, d]].T
    return Psi


def _as_2d(q):
    q = np.asarray(q, dtype=float)
    return q[:, None] if q.ndim == 1 else q


def _qr(Psi):
    """Economic pivoted QR with a rank check."""
    n_s, n_p = Psi.shape
    if n_s < n_p:
        warnings.warn(f"underdetermined regression: {n_s} samples for {n_p} terms", RuntimeWarning,
                      stacklevel=3)
    Q, R, piv = linalg.qr(Psi, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n_s, n_p) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < n_p:
        raise RankDeficiencyError(
            f"regression matrix is rank deficient: {n_p - rank} of {n_p} columns are dependent",
            n_p - rank)
    return Q, R, piv


def _solve(Q, R, piv, q):
    z = linalg.solve_triangular(R, Q.T @ q)
    u = np.empty_like(z)
    u[piv] = z
    return u


def ols_fit(Psi, q) -> np.ndarray:
    """Least-squares coefficients via pivoted QR, shape ``(N_p, N_q)`` (or ``(N_p,)`` for vector ``q``)."""
    q_in = np.asarray(q, dtype=float)
    Q, R, piv = _qr(np.asarray(Psi, dtype=float))
    u = _solve(Q, R, piv, _as_2d(q_in))
    return u[:, 0] if q_in.ndim == 1 else u


def _loo_from_q(Q, q):
    h = np.sum(Q * Q, axis=1)
    if np.any(h >= 1.0 - 1e-12):
        raise IllPosedLOOError(f"hat-matrix diagonal reaches 1 (max {h.max():.15f}); LOO undefined")
    resid = q - Q @ (Q.T @ q)
    e = resid / (1.0 - h)[:, None]
    num = np.linalg.norm(e, axis=0)
    den = np.linalg.norm(q, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return rel


def loocv_error(Psi, q, per_output=False):
    """Leave-one-out relative error ``||e||_2 / ||q||_2`` averaged over outputs.

    LOO residuals use ``e_i = r_i / (1 - h_ii)`` with ``h`` the hat-matrix diagonal.
    """
    Q, _, _ = _qr(np.asarray(Psi, dtype=float))
    rel = _loo_from_q(Q, _as_2d(q))
    return rel if per_output else float(np.mean(rel))


def ols_with_loo(Psi, q):
    """Coefficients and per-output LOO errors from a single factorization."""
    q = _as_2d(q)
    Q, R, piv = _qr(np.asarray(Psi, dtype=float))
    return _solve(Q, R, piv, q), _loo_from_q(Q, q)


@dataclass
class PceModel:
    basis: MultiIndexSet
    coeffs: np.ndarray
    space: InputSpace
    loocv_error: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = _as_2d(self.coeffs)
        if self.coeffs.shape[0] != len(self.basis):
            raise ValueError("coefficient rows must match basis size")

    @property
    def n_terms(self) -> int:
        return len(self.basis)

    @property
    def n_outputs(self) -> int:
        return self.coeffs.shape[1]

    def evaluate(self, xi, batch=20000) -> np.ndarray:
        """Surrogate values at the rows of ``xi``, shape ``(n, N_q)``."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        out = np.empty((xi.shape[0], self.n_outputs))
        for s in range(0, xi.shape[0], batch):
            out[s:s + batch] = regression_matrix(self.basis, xi[s:s + batch], self.space) @ self.coeffs
        return out

    def save(self, path):
        lines = [
            "# terrainuq polynomial chaos model",
            f"n_d {self.space.dim}",
            f"n_q {self.n_outputs}",
            f"space_hash {self.space.digest()}",
            f"loocv_error {self.loocv_error:.17g}",
            f"n_terms {self.n_terms}",
        ]
        for idx, row in zip(self.basis, self.coeffs):
            lines.append(" ".join(str(k) for k in idx) + " " + " ".join(f"{c:.17g}" for c in row))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path, space: InputSpace) -> PceModel:
        header, rows = {}, []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if not parts[0].isdigit():
                header[parts[0]] = parts[1]
            else:
                rows.append(parts)
        n_d, n_q = int(header["n_d"]), int(header["n_q"])
        if n_d != space.dim or header["space_hash"] != space.digest():
            raise ConfigurationError(f"{path}: model was fitted on a different input space")
        basis = MultiIndexSet([tuple(int(k) for k in r[:n_d]) for r in rows], n_d)
        coeffs = np.array([[float(c) for c in r[n_d:]] for r in rows]).reshape(len(rows), n_q)
        return cls(basis, coeffs, space, float(header["loocv_error"]))


def fit_standard_pce(samples: SampleSet, space: InputSpace, max_order: int) -> PceModel:
    """OLS expansion on the full total-order basis."""
    basis = total_order_set(space.dim, max_order)
    n_s = len(samples)
    if len(basis) > n_s:
        best = max((p for p in range(max_order) if total_order_size(space.dim, p) <= n_s), default=0)
        raise ConfigurationError(
            f"total order {max_order} needs {len(basis)} terms but only {n_s} samples are available; "
            f"use max_order <= {best}")
    Psi = regression_matrix(basis, samples.xi, space)
    coeffs, errs = ols_with_loo(Psi, samples.q)
    return PceModel(basis, coeffs, space, float(np.mean(errs)), {"method": "StandardPCE"})


def _lars_steps(X, y):
    """Active sets (column lists) along the LAR path, starting from the empty set."""
    from sklearn.exceptions import ConvergenceWarning
    from sklearn.linear_model import lars_path

    with warnings.catch_warnings():
        # degenerate regressors near the end of the path are dropped by LARS itself
        warnings.simplefilter("ignore", ConvergenceWarning)
        _, _, coefs = lars_path(X, y, method="lar", return_path=True)
    steps = [[]]
    for k in range(1, coefs.shape[1]):
        act = sorted(int(j) for j in np.flatnonzero(coefs[:, k]))
        if act and act != steps[-1]:
            steps.append(act)
    return steps


def fit_sparse_pce(samples: SampleSet, space: InputSpace, max_order: int) -> PceModel:
    """Hybrid LARS expansion: LAR selects terms, OLS refits, LOO picks the path point.

    Each output gets its own path and its own refit on the selected terms; the
    model basis is the union of the selections with zeros where a term is
    inactive for an output.
    """
    cand = total_order_set(space.dim, max_order)
    Psi = regression_matrix(cand, samples.xi, space)
    q = _as_2d(samples.q)
    n_s = Psi.shape[0]
    X = Psi[:, 1:]
    sd = X.std(axis=0)
    usable = np.flatnonzero(sd > 1e-14 * max(1.0, float(np.abs(X).max(initial=0.0))))
    Xs = (X[:, usable] - X[:, usable].mean(axis=0)) / sd[usable]

    chosen, per_coef, per_err = [], [], []
    for c in range(q.shape[1]):
        y = q[:, c] - q[:, c].mean()
        steps = _lars_steps(Xs, y) if np.any(y != 0) and usable.size else [[]]
        best = None
        for act in steps:
            cols = [0] + [int(usable[j]) + 1 for j in act]
            if len(cols) >= n_s:
                break
            try:
                u, err = ols_with_loo(Psi[:, cols], q[:, c])
            except (RankDeficiencyError, IllPosedLOOError):
                continue
            if best is None or err[0] < best[0]:
                best = (float(err[0]), cols, u[:, 0])
        if best is None:  # constant-only fallback
            best = (float(loocv_error(Psi[:, :1], q[:, c])), [0], np.array([q[:, c].mean()]))
        per_err.append(best[0])
        chosen.append(best[1])
        per_coef.append(best[2])

    keep = sorted(set().union(*map(set, chosen)))
    basis = MultiIndexSet([cand[j] for j in keep], space.dim)
    pos = {j: i for i, j in enumerate(keep)}
    coeffs = np.zeros((len(keep), q.shape[1]))
    for c, (cols, u) in enumerate(zip(chosen, per_coef)):
        coeffs[[pos[j] for j in cols], c] = u
    return PceModel(basis, coeffs, space, float(np.mean(per_err)),
                    {"method": "SparsePCE", "candidate_size": len(cand)})
