"""Bounded Beta inputs, matching orthonormal Jacobi polynomials and LHS designs.

A Beta(alpha, beta) variable on ``[lower, upper]`` maps affinely to
``t in [-1, 1]`` where its density is proportional to
``(1 - t)**(beta - 1) * (1 + t)**(alpha - 1)``.  That is the Jacobi weight
with parameters ``a = beta - 1`` and ``b = alpha - 1``.
"""
from __future__ import annotations

import csv
import functools
import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import special

from .errors import ConfigurationError

__all__ = [
    "RandomInputSpec",
    "InputSpace",
    "SampleSet",
    "make_rng",
    "beta_pdf",
    "beta_cdf",
    "beta_inverse_cdf",
    "lhs_sample",
    "random_sample",
    "jacobi_orthonormal_eval",
    "univariate_table",
    "multivariate_basis_eval",
    "antenna_input_space",
]


@dataclass(frozen=True)
class RandomInputSpec:
    name: str
    alpha: float
    beta: float
    lower: float
    upper: float
    unit: str = ""

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigurationError(f"{self.name}: Beta shape parameters must be > 0")
        if not self.upper > self.lower:
            raise ConfigurationError(f"{self.name}: upper bound must exceed lower bound")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def mean(self) -> float:
        return self.lower + self.width * self.alpha / (self.alpha + self.beta)

    @property
    def std(self) -> float:
        a, b = self.alpha, self.beta
        return self.width * math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))

    def to_unit(self, x):
        """Map physical values to ``[0, 1]``."""
        return (np.asarray(x, dtype=float) - self.lower) / self.width

    def from_unit(self, s):
        return self.lower + self.width * np.asarray(s, dtype=float)


@dataclass(frozen=True)
class InputSpace:
    inputs: tuple

    def __init__(self, inputs: Sequence[RandomInputSpec]):
        inputs = tuple(inputs)
        if not inputs:
            raise ConfigurationError("input space needs at least one input")
        names = [s.name for s in inputs]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"input names must be unique, got {names}")
        object.__setattr__(self, "inputs", inputs)

    def __len__(self):
        return len(self.inputs)

    def __iter__(self):
        return iter(self.inputs)

    def __getitem__(self, i):
        return self.inputs[i]

    @property
    def names(self):
        return [s.name for s in self.inputs]

    @property
    def dim(self) -> int:
        return len(self.inputs)

    @property
    def lower(self):
        return np.array([s.lower for s in self.inputs])

    @property
    def upper(self):
        return np.array([s.upper for s in self.inputs])

    def digest(self) -> str:
        """Stable hash of the space definition."""
        payload = json.dumps([asdict(s) for s in self.inputs], sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def make_rng(seed, *stream):
    """Counter-based (Philox) generator keyed by ``seed`` and an optional stream id."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


# ---------------------------------------------------------------------------
# Beta distribution

def beta_pdf(x, spec: RandomInputSpec):
    """Density of ``spec`` (zero outside the support)."""
    s = spec.to_unit(x)
    a, b = spec.alpha, spec.beta
    inside = (s >= 0) & (s <= 1)
    sc = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = special.xlog1py(b - 1, -sc) + special.xlogy(a - 1, sc) - special.betaln(a, b)
        p = np.where(inside, np.exp(logp), 0.0)
    p = p / spec.width
    return p if np.ndim(p) else float(p)


def beta_cdf(x, spec: RandomInputSpec):
    s = np.clip(spec.to_unit(x), 0.0, 1.0)
    return special.betainc(spec.alpha, spec.beta, s)


def _unit_quantile(p, a, b, tol, max_iter):
    """Solve ``I_x(a, b) = p`` on [0, 1] for an array ``p`` in the lower half."""
    lo = np.zeros_like(p)
    hi = np.ones_like(p)
    x = np.clip(special.betaincinv(a, b, p), 0.0, 1.0)
    x = np.where(np.isfinite(x) & (x > 0) & (x < 1), x, 0.5)
    active = (p > 0) & (p < 1)
    lbeta = special.betaln(a, b)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        xa = x[idx]
        f = special.betainc(a, b, xa) - p[idx]
        lo_a = np.where(f <= 0, xa, lo[idx])
        hi_a = np.where(f >= 0, xa, hi[idx])
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            dens = np.exp(special.xlogy(a - 1, xa) + special.xlog1py(b - 1, -xa) - lbeta)
            xn = xa - f / dens
        # fall back to bisection whenever Newton leaves the bracket
        bad = ~np.isfinite(xn) | (xn <= lo_a) | (xn >= hi_a)
        xn = np.where(bad, 0.5 * (lo_a + hi_a), xn)
        xn = np.where(f == 0, xa, xn)
        done = (f == 0) | (np.abs(xn - xa) <= tol * xa) | (hi_a - lo_a <= tol * lo_a)
        x[idx], lo[idx], hi[idx] = xn, lo_a, hi_a
        active[idx[done]] = False
    return np.where(p <= 0, 0.0, np.where(p >= 1, 1.0, x))


def beta_inverse_cdf(p, spec: RandomInputSpec, tol=1e-15, max_iter=200):
    """Quantile function by bracketed Newton iteration on the regularised incomplete beta.

    Each iterate keeps a bracket ``[lo, hi]`` with ``I(lo) <= p <= I(hi)``.
    Upper-tail probabilities are solved through the complementary
    distribution ``Beta(beta, alpha)`` so both tails keep full precision.
    """
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("probabilities must lie in [0, 1]")
    flat = np.atleast_1d(p).ravel()
    upper = flat > 0.5
    s = np.empty_like(flat)
    s[~upper] = _unit_quantile(flat[~upper], spec.alpha, spec.beta, tol, max_iter)
    s[upper] = 1.0 - _unit_quantile(1.0 - flat[upper], spec.beta, spec.alpha, tol, max_iter)
    out = spec.from_unit(s).reshape(p.shape)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# sampling

def lhs_sample(space: InputSpace, n: int, seed: int) -> np.ndarray:
    """Plain Latin hypercube design in physical units, shape ``(n, dim)``.

    Each column visits every one of the ``n`` equiprobable strata exactly once
    (independent random permutation per dimension, uniform jitter inside the
    stratum) and is mapped through the Beta quantile function.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed)
    out = np.empty((n, space.dim))
    for i, spec in enumerate(space):
        perm = rng.permutation(n)
        u = (perm + rng.random(n)) / n
        out[:, i] = beta_inverse_cdf(u, spec)
    return out


def random_sample(space: InputSpace, n: int, seed: int, stream=0) -> np.ndarray:
    """Independent draws by inverse CDF, shape ``(n, dim)``."""
    rng = make_rng(seed, stream)
    u = rng.random((n, space.dim))
    return np.column_stack([beta_inverse_cdf(u[:, i], spec) for i, spec in enumerate(space)])


# ---------------------------------------------------------------------------
# orthonormal Jacobi polynomials

def _jacobi_params(spec):
    return spec.beta - 1.0, spec.alpha - 1.0


def _log_ratio(n, a, b):
    """log(h_n / h_0) for the classical Jacobi squared norms h_n."""
    # h_n = 2^(a+b+1)/(2n+a+b+1) G(n+a+1)G(n+b+1)/(G(n+a+b+1) n!)
    # h_0 = 2^(a+b+1) G(a+1)G(b+1)/G(a+b+2)
    return (-math.log(2 * n + a + b + 1)
            + special.gammaln(n + a + 1) + special.gammaln(n + b + 1)
            - special.gammaln(n + a + b + 1) - special.gammaln(n + 1)
            - special.gammaln(a + 1) - special.gammaln(b + 1) + special.gammaln(a + b + 2))


def _classical_table(max_order, a, b, t):
    """P_0..P_max_order (classical normalisation) at points ``t`` by the three-term recurrence."""
    P = np.empty((max_order + 1,) + t.shape)
    P[0] = 1.0
    if max_order >= 1:
        P[1] = 0.5 * (2 * (a + 1) + (a + b + 2) * (t - 1))
    for n in range(2, max_order + 1):
        c = 2 * n + a + b
        a1 = 2 * n * (n + a + b) * (c - 2)
        a2 = (c - 1) * (c * (c - 2) * t + a * a - b * b)
        a3 = 2 * (n + a - 1) * (n + b - 1) * c
        P[n] = (a2 * P[n - 1] - a3 * P[n - 2]) / a1
    return P


@functools.lru_cache(maxsize=None)
def _scales(max_order, alpha, beta):
    a, b = beta - 1.0, alpha - 1.0
    scales = np.array([1.0] + [math.exp(-0.5 * _log_ratio(n, a, b)) for n in range(1, max_order + 1)])
    _verify_normalisation(scales, a, b)
    return scales


def _verify_normalisation(scales, a, b):
    order = len(scales) - 1
    nodes, weights = special.roots_jacobi(max(order + 1, 2), a, b)
    weights = weights / weights.sum()
    V = _classical_table(order, a, b, nodes) * scales[:, None]
    gram = (V * weights) @ V.T
    err = np.abs(gram - np.eye(order + 1)).max()
    if err > 1e-8:
        raise RuntimeError(f"Jacobi normalisation check failed (a={a}, b={b}, err={err:.2e})")


def univariate_table(max_order: int, x, spec: RandomInputSpec) -> np.ndarray:
    """Orthonormal polynomials of orders ``0..max_order`` at ``x``; shape ``(max_order+1,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    t = 2.0 * spec.to_unit(x) - 1.0
    a, b = _jacobi_params(spec)
    return _classical_table(max_order, a, b, t) * _scales(max_order, spec.alpha, spec.beta).reshape(
        (-1,) + (1,) * t.ndim)


def jacobi_orthonormal_eval(order: int, x, spec: RandomInputSpec):
    """Degree-``order`` polynomial orthonormal under ``spec``'s Beta density."""
    if order < 0:
        raise ValueError("order must be >= 0")
    val = univariate_table(order, x, spec)[order]
    return val if val.ndim else float(val)


def multivariate_basis_eval(index, xi_row, space: InputSpace) -> float:
    """Tensor-product basis function ``prod_i psi_{index_i}(xi_i)``."""
    index = tuple(int(k) for k in index)
    xi_row = np.asarray(xi_row, dtype=float)
    if len(index) != space.dim or xi_row.shape[-1] != space.dim:
        raise ValueError(f"multi-index/sample length must equal the input dimension {space.dim}")
    val = 1.0
    for k, x, spec in zip(index, xi_row, space):
        if k:
            val = val * jacobi_orthonormal_eval(k, x, spec)
    return float(val)


# ---------------------------------------------------------------------------
# sample sets

@dataclass
class SampleSet:
    """Input realisations and the matching QoI evaluations."""

    xi: np.ndarray
    q: np.ndarray
    seed: int

    def __post_init__(self):
        self.xi = np.atleast_2d(np.asarray(self.xi, dtype=float))
        self.q = np.asarray(self.q, dtype=float)
        if self.q.ndim == 1:
            self.q = self.q[:, None]
        if self.xi.shape[0] != self.q.shape[0]:
            raise ValueError("xi and q must have the same number of rows")

    def __len__(self):
        return self.xi.shape[0]

    def check_bounds(self, space: InputSpace):
        lo, hi = space.lower, space.upper
        if np.any(self.xi < lo) or np.any(self.xi > hi):
            raise ConfigurationError("sample outside the input support")

    def to_csv(self, path, space=None, extra=None):
        path = Path(path)
        nd, nq = self.xi.shape[1], self.q.shape[1]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"xi_{i + 1}" for i in range(nd)] + [f"q_{j + 1}" for j in range(nq)])
            for xr, qr in zip(self.xi, self.q):
                w.writerow([f"{v:.17g}" for v in xr] + [f"{v:.17g}" for v in qr])
        manifest = {"seed": int(self.seed), "n": len(self), "n_d": nd, "n_q": nq}
        if space is not None:
            manifest["space_hash"] = space.digest()
            manifest["inputs"] = space.names
        if extra:
            manifest.update(extra)
        path.with_suffix(".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path) -> SampleSet:
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        nd = sum(h.startswith("xi_") for h in header)
        seed = 0
        mpath = path.with_suffix(".manifest.json")
        if mpath.exists():
            seed = json.loads(mpath.read_text()).get("seed", 0)
        return cls(data[:, :nd], data[:, nd:], seed)


def antenna_input_space(band="jerslev") -> InputSpace:
    """The five Beta(3, 3) antenna inputs with the bounds used for the two terrains."""
    freq = {"jerslev": (410e6, 460e6), "hjorringvej": (920e6, 1020e6)}[band.lower()]
    return InputSpace([
        RandomInputSpec("tx_height_m", 3, 3, 9.0, 13.0, "m"),
        RandomInputSpec("rx_height_m", 3, 3, 1.0, 4.0, "m"),
        RandomInputSpec("elevation_deg", 3, 3, -3.0, 3.0, "deg"),
        RandomInputSpec("beamwidth_deg", 3, 3, 4.0, 12.0, "deg"),
        RandomInputSpec("frequency_hz", 3, 3, freq[0], freq[1], "Hz"),
    ])
