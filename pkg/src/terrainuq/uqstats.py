"""Mean and percentile extraction from surrogates and Monte Carlo, and error metrics.

Path loss in dB is the quantity of interest throughout.  Monte Carlo draws are
keyed by ``(seed, sample index)`` so that the result does not depend on how
evaluations are spread over worker processes.
"""
from __future__ import annotations

import enum
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .apce import ApceConfig, fit_apce
from .errors import ConfigurationError, PartialSampleFailure, SimulationError
from .pce import PceModel, fit_sparse_pce, fit_standard_pce
from .pwe.config import AntennaConfig, PweConfig
from .pwe.solver import run_two_way
from .pwe.terrain import TerrainProfile
from .stochastic import InputSpace, SampleSet, beta_inverse_cdf, lhs_sample, make_rng, random_sample

__all__ = [
    "Method",
    "UqSummary",
    "ErrorReport",
    "surrogate_mean",
    "surrogate_percentiles",
    "summarize",
    "antenna_from_sample",
    "evaluate_design",
    "mc_draws",
    "mc_reference",
    "relative_errors",
    "run_uq_pipeline",
    "fit_surrogate",
    "manifest",
]

ANTENNA_FIELDS = tuple(f.name for f in fields(AntennaConfig))
LEVELS = (0.05, 0.95)
# stream id used for surrogate Monte Carlo, distinct from the design streams
SURROGATE_STREAM = 7


class Method(str, enum.Enum):
    MC = "MC"
    STANDARD = "StandardPCE"
    SPARSE = "SparsePCE"
    APCE = "APCE"

    @classmethod
    def parse(cls, value) -> Method:
        if isinstance(value, Method):
            return value
        key = str(value).strip().lower()
        aliases = {"mc": cls.MC, "standard": cls.STANDARD, "standardpce": cls.STANDARD,
                   "sparse": cls.SPARSE, "sparsepce": cls.SPARSE, "apce": cls.APCE}
        if key not in aliases:
            raise ConfigurationError(f"unknown method {value!r}; expected mc, standard, sparse or apce")
        return aliases[key]


@dataclass
class UqSummary:
    ranges_m: np.ndarray
    mean_db: np.ndarray
    q05_db: np.ndarray
    q95_db: np.ndarray
    n_model_evals: int
    method: Method

    def __post_init__(self):
        for name in ("ranges_m", "mean_db", "q05_db", "q95_db"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.ranges_m.shape
        if not (self.mean_db.shape == self.q05_db.shape == self.q95_db.shape == n):
            raise ValueError("summary vectors must all have the range-grid length")
        self.method = Method.parse(self.method)

    def to_csv(self, path):
        rows = ["range_m,mean_db,q05_db,q95_db"]
        for r, m, a, b in zip(self.ranges_m, self.mean_db, self.q05_db, self.q95_db):
            rows.append(f"{r:.9g},{m:.9g},{a:.9g},{b:.9g}")
        Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")

    @classmethod
    def from_csv(cls, path, method="MC", n_model_evals=0) -> UqSummary:
        d = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(d[:, 0], d[:, 1], d[:, 2], d[:, 3], n_model_evals, method)


@dataclass(frozen=True)
class ErrorReport:
    e_mean: float
    e_q05: float
    e_q95: float

    def to_text(self, path=None) -> str:
        text = "".join(f"{k} {v:.9g}\n" for k, v in asdict(self).items())
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_text(cls, path) -> ErrorReport:
        kv = dict(line.split() for line in Path(path).read_text().splitlines() if line.strip())
        return cls(float(kv["e_mean"]), float(kv["e_q05"]), float(kv["e_q95"]))


# ---------------------------------------------------------------------------
# surrogate statistics

def surrogate_mean(model: PceModel) -> np.ndarray:
    """Coefficient row of the constant term: the exact mean of an orthonormal expansion."""
    zero = (0,) * model.space.dim
    if zero not in model.basis:
        raise ValueError("model basis has no constant term")
    return model.coeffs[model.basis.position(zero)].copy()


def surrogate_percentiles(model: PceModel, space: InputSpace, n_mc: int = 100_000,
                          levels: Sequence[float] = LEVELS, seed: int = 0) -> dict:
    """Empirical quantiles of the surrogate over ``n_mc`` independent input draws.

    Returns a mapping ``level -> vector of N_q`` with linearly interpolated
    order statistics (the common "type 7" estimator).
    """
    if n_mc < 1000:
        raise ValueError("surrogate percentiles need n_mc >= 1000")
    xi = random_sample(space, int(n_mc), seed, stream=SURROGATE_STREAM)
    values = model.evaluate(xi)
    qs = np.quantile(values, sorted(levels), axis=0, method="linear")
    return {lvl: qs[i] for i, lvl in enumerate(sorted(levels))}


def summarize(values, ranges_m, method, n_model_evals=None) -> UqSummary:
    """Mean and 5th/95th percentiles of an ``(n, N_r)`` array of traces."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    q05, q95 = np.quantile(values, LEVELS, axis=0, method="linear")
    n = values.shape[0] if n_model_evals is None else n_model_evals
    return UqSummary(ranges_m, values.mean(axis=0), q05, q95, n, method)


def relative_errors(summary: UqSummary, reference: UqSummary) -> ErrorReport:
    """Relative l2 errors of mean, 5th and 95th percentile against a reference."""
    if summary.ranges_m.shape != reference.ranges_m.shape or not np.allclose(
            summary.ranges_m, reference.ranges_m):
        raise ValueError("summary and reference use different range grids")
    out = []
    for name in ("mean_db", "q05_db", "q95_db"):
        ref = getattr(reference, name)
        den = np.linalg.norm(ref)
        if den == 0:
            raise ValueError(f"reference {name} has zero norm")
        out.append(float(np.linalg.norm(getattr(summary, name) - ref) / den))
    return ErrorReport(*out)


# ---------------------------------------------------------------------------
# forward model evaluation

def antenna_from_sample(row, space: InputSpace, nominal: AntennaConfig | None = None) -> AntennaConfig:
    """Antenna configuration with the uncertain fields taken from ``row``."""
    values = asdict(nominal) if nominal is not None else {}
    for spec, x in zip(space, row):
        if spec.name not in ANTENNA_FIELDS:
            raise ConfigurationError(
                f"uncertain input {spec.name!r} is not an antenna field ({', '.join(ANTENNA_FIELDS)})")
        values[spec.name] = float(x)
    missing = [f for f in ANTENNA_FIELDS if f not in values]
    if missing:
        raise ConfigurationError(f"no nominal value for antenna fields {missing}")
    return AntennaConfig(**values)


def _evaluate_one(args):
    terrain, row, space, nominal, cfg = args
    try:
        return run_two_way(terrain, antenna_from_sample(row, space, nominal), cfg).path_loss_db, None
    except SimulationError as exc:
        return None, str(exc)


def evaluate_design(terrain: TerrainProfile, xi, space: InputSpace, cfg: PweConfig,
                    nominal: AntennaConfig | None = None, workers: int = 1, allow_partial=False):
    """Run the PE model at every design row.

    Returns ``(ranges_m, Q)`` with ``Q`` of shape ``(n, N_r)``.  Failed rows
    raise :class:`PartialSampleFailure`; with ``allow_partial`` their ``Q``
    rows are NaN instead.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    nominal = nominal or _default_nominal(cfg)
    ranges = cfg.ranges[max(cfg.near_field_steps, 1):]
    jobs = [(terrain, row, space, nominal, cfg) for row in xi]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate_one, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        results = [_evaluate_one(j) for j in jobs]
    Q = np.full((len(jobs), ranges.size), np.nan)
    failed = []
    for i, (pl, err) in enumerate(results):
        if pl is None:
            failed.append((i, err))
        else:
            Q[i] = pl
    if failed and not allow_partial:
        i, err = failed[0]
        raise PartialSampleFailure(
            f"{len(failed)} of {len(jobs)} evaluations failed; first: sample {i} at "
            f"{dict(zip(space.names, xi[i].tolist()))}: {err}", [f[0] for f in failed])
    return ranges, Q


def _default_nominal(cfg):
    return AntennaConfig(11.0, 2.5, 0.0, 8.0, cfg.frequency_hz)


def mc_draws(space: InputSpace, n_mc: int, seed: int) -> np.ndarray:
    """Independent input draws, row ``i`` generated from its own ``(seed, i)`` stream."""
    u = np.array([make_rng(seed, i).random(space.dim) for i in range(n_mc)]).reshape(n_mc, space.dim)
    return np.column_stack([beta_inverse_cdf(u[:, d], spec) for d, spec in enumerate(space)])


def _cache_key(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode())
    return h.hexdigest()[:20]


def mc_reference(terrain: TerrainProfile, antenna_space: InputSpace, cfg: PweConfig, n_mc: int,
                 seed: int = 0, nominal: AntennaConfig | None = None, workers: int = 1,
                 cache_dir=None, return_samples=False):
    """Brute-force Monte Carlo statistics of path loss.

    With ``cache_dir`` the raw traces are stored as ``.npz`` under a key
    derived from every input, so repeated calls reuse them.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    nominal = nominal or _default_nominal(cfg)
    cache = None
    if cache_dir is not None:
        key = _cache_key(__version__, terrain.points.tobytes(), antenna_space.digest(), cfg, nominal,
                         int(n_mc), int(seed))
        cache = Path(cache_dir) / f"mc_{key}.npz"
    if cache is not None and cache.exists():
        data = np.load(cache)
        xi, ranges, Q = data["xi"], data["ranges"], data["q"]
    else:
        xi = mc_draws(antenna_space, n_mc, seed)
        try:
            ranges, Q = evaluate_design(terrain, xi, antenna_space, cfg, nominal, workers)
        except PartialSampleFailure as exc:
            raise SimulationError(f"Monte Carlo reference aborted: {exc}") from exc
        if cache is not None:
            cache.parent.mkdir(parents=True, exist_ok=True)
            tmp = cache.with_suffix(".tmp.npz")
            np.savez(tmp, xi=xi, ranges=ranges, q=Q)
            os.replace(tmp, cache)
    summary = summarize(Q, ranges, Method.MC)
    if return_samples:
        return summary, SampleSet(xi, Q, seed)
    return summary


def run_uq_pipeline(terrain: TerrainProfile, space: InputSpace, cfg: PweConfig, method, n_train: int,
                    seed: int, *, nominal: AntennaConfig | None = None, workers: int = 1,
                    n_surrogate_mc: int = 100_000, surrogate_seed: int | None = None,
                    standard_order: int = 2, sparse_order: int = 3, apce: ApceConfig | None = None,
                    samples: SampleSet | None = None, n_mc_reference: int = 10_000, cache_dir=None):
    """Design, simulate, fit and summarise.

    Returns ``(model, summary)``; ``model`` is None for Monte Carlo.  A
    precomputed ``samples`` set skips the design and simulation stages.
    """
    method = Method.parse(method)
    if method is Method.MC:
        return None, mc_reference(terrain, space, cfg, n_mc_reference, seed, nominal, workers, cache_dir)
    if n_train < 4:
        raise ConfigurationError("surrogate methods need n_train >= 4")
    if samples is None:
        xi = lhs_sample(space, n_train, seed)
        ranges, Q = evaluate_design(terrain, xi, space, cfg, nominal, workers)
        samples = SampleSet(xi, Q, seed)
    else:
        ranges = cfg.ranges[max(cfg.near_field_steps, 1):]
    model = fit_surrogate(samples, space, method, standard_order, sparse_order, apce)
    mean = surrogate_mean(model)
    pct = surrogate_percentiles(model, space, n_surrogate_mc, LEVELS,
                                seed if surrogate_seed is None else surrogate_seed)
    return model, UqSummary(ranges, mean, pct[0.05], pct[0.95], len(samples), method)


def fit_surrogate(samples: SampleSet, space: InputSpace, method, standard_order=2, sparse_order=3,
                  apce: ApceConfig | None = None) -> PceModel:
    method = Method.parse(method)
    if method is Method.STANDARD:
        return fit_standard_pce(samples, space, standard_order)
    if method is Method.SPARSE:
        return fit_sparse_pce(samples, space, sparse_order)
    if method is Method.APCE:
        return fit_apce(samples, space, apce)
    raise ConfigurationError("Monte Carlo is not a surrogate method")


def manifest(**entries) -> str:
    """JSON manifest text with the package version added."""
    entries.setdefault("version", __version__)
    return json.dumps(entries, indent=2, sort_keys=True, default=str) + "\n"
