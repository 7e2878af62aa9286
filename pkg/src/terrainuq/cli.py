"""Command-line driver: ``terrainuq <command> --config exp.ini [options]``.

Commands
--------
simulate     one deterministic run at the nominal antenna
sample       Latin hypercube design and PE evaluations (resumable)
fit          surrogate from a sample file
uq           design, simulate, fit and summarise with one method
mc           brute-force Monte Carlo reference
compare      relative errors of several methods over independent training sets
convergence  adaptive-expansion LOO error versus training-set size

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 partial sample failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .apce import write_trace
from .errors import (ConfigurationError, IllPosedLOOError, PartialSampleFailure, RankDeficiencyError,
                     SimulationError)
from .experiment import ExperimentConfig, load_config
from .pwe.solver import run_two_way
from .stochastic import SampleSet, lhs_sample
from .uqstats import (Method, evaluate_design, fit_surrogate, manifest, mc_reference, relative_errors,
                      run_uq_pipeline)

log = logging.getLogger("terrainuq")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 2, 3, 4


def _manifest(exp: ExperimentConfig, command, path, **extra):
    Path(path).write_text(manifest(command=command, config=exp.source, config_hash=exp.digest(), seed=exp.seed,
                                   **extra))


def _out(exp: ExperimentConfig) -> Path:
    exp.output_dir.mkdir(parents=True, exist_ok=True)
    return exp.output_dir


def _cache(exp):
    return exp.output_dir / ".cache"


# ---------------------------------------------------------------------------
# training sets

def _row_key(row) -> str:
    return hashlib.sha256(np.asarray(row, dtype=float).tobytes()).hexdigest()[:16]


def sample_design(exp: ExperimentConfig, n: int, seed: int, path: Path, chunk: int = 16) -> SampleSet:
    """Evaluate an LHS design, appending finished rows to a ``.partial`` journal.

    Rerunning after an interruption skips rows already in the journal, so the
    final CSV is identical to an uninterrupted run.
    """
    xi = lhs_sample(exp.input_space, n, seed)
    tag = f"{exp.digest()}:{n}:{seed}"
    journal = path.with_suffix(".partial")
    done = {}
    lines = journal.read_text().splitlines() if journal.exists() else []
    if lines and lines[0] == tag:
        for line in lines[1:]:
            parts = line.split(",")
            if len(parts) > 1:
                done[parts[0]] = np.array([float(v) for v in parts[1:]])
    else:
        journal.write_text(tag + "\n")
    keys = [_row_key(r) for r in xi]
    todo = [i for i, k in enumerate(keys) if k not in done]
    failed = []
    for s in range(0, len(todo), chunk):
        idx = todo[s:s + chunk]
        _, Q = evaluate_design(exp.terrain, xi[idx], exp.input_space, exp.pwe, exp.antenna_nominal,
                               exp.workers, allow_partial=True)
        with open(journal, "a") as fh:
            for i, q in zip(idx, Q):
                if np.all(np.isfinite(q)):
                    done[keys[i]] = q
                    fh.write(keys[i] + "," + ",".join(f"{v:.17g}" for v in q) + "\n")
                else:
                    failed.append(i)
    if failed:
        raise PartialSampleFailure(f"{len(failed)} of {n} samples failed: indices {sorted(failed)}", sorted(failed))
    samples = SampleSet(xi, np.array([done[k] for k in keys]), seed)
    samples.to_csv(path, exp.input_space, {"config_hash": exp.digest(), "version": __version__})
    journal.unlink()
    return samples


def training_set(exp: ExperimentConfig, n: int, seed: int) -> SampleSet:
    cache = _cache(exp)
    cache.mkdir(parents=True, exist_ok=True)
    path = cache / f"train_{exp.digest()}_{n}_{seed}.csv"
    if path.exists():
        return SampleSet.from_csv(path)
    return sample_design(exp, n, seed, path)


def _reference(exp):
    return mc_reference(exp.terrain, exp.input_space, exp.pwe, exp.uq.n_mc_reference, exp.seed,
                        exp.antenna_nominal, exp.workers, _cache(exp))


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(exp: ExperimentConfig, args) -> int:
    out = _out(exp)
    trace = run_two_way(exp.terrain, exp.antenna_nominal, exp.pwe)
    trace.to_csv(out / "path_loss.csv")
    _manifest(exp, "simulate", out / "path_loss.manifest.json", n_points=len(trace))
    log.info("wrote %s (%d range points)", out / "path_loss.csv", len(trace))
    return EXIT_OK


def cmd_sample(exp: ExperimentConfig, args) -> int:
    out = _out(exp)
    n = args.n or exp.uq.n_train
    samples = sample_design(exp, n, exp.seed, out / "samples.csv")
    log.info("wrote %s (%d samples)", out / "samples.csv", len(samples))
    return EXIT_OK


def cmd_fit(exp: ExperimentConfig, args) -> int:
    out = _out(exp)
    path = Path(args.samples) if args.samples else out / "samples.csv"
    if not path.exists():
        raise ConfigurationError(f"{path}: sample file not found (run 'sample' first)")
    samples = SampleSet.from_csv(path)
    if samples.xi.shape[1] != exp.input_space.dim:
        raise ConfigurationError(f"{path}: {samples.xi.shape[1]} input columns, config declares "
                                 f"{exp.input_space.dim}")
    method = exp.uq.method
    model = fit_surrogate(samples, exp.input_space, method, exp.uq.standard_order, exp.uq.sparse_order,
                          exp.uq.apce)
    name = method.value.lower()
    model.save(out / f"model_{name}.txt")
    if method is Method.APCE:
        write_trace(model, out / "trace_apce.csv")
    _manifest(exp, "fit", out / f"model_{name}.manifest.json", method=method.value, samples=str(path),
              n_train=len(samples), n_terms=model.n_terms, loocv_error=model.loocv_error,
              stop_reason=model.meta.get("stop_reason"))
    log.info("%s: %d terms, LOO error %.3e", method.value, model.n_terms, model.loocv_error)
    return EXIT_OK


def cmd_uq(exp: ExperimentConfig, args) -> int:
    out = _out(exp)
    method = exp.uq.method
    t0 = time.perf_counter()
    samples = None
    if method is not Method.MC:
        samples = training_set(exp, exp.uq.n_train, exp.seed)
    model, summary = run_uq_pipeline(
        exp.terrain, exp.input_space, exp.pwe, method, exp.uq.n_train, exp.seed,
        nominal=exp.antenna_nominal, workers=exp.workers, n_surrogate_mc=exp.uq.n_surrogate_mc,
        standard_order=exp.uq.standard_order, sparse_order=exp.uq.sparse_order, apce=exp.uq.apce,
        samples=samples, n_mc_reference=exp.uq.n_mc_reference, cache_dir=_cache(exp))
    name = method.value.lower()
    summary.to_csv(out / f"uq_{name}.csv")
    if model is not None:
        model.save(out / f"model_{name}.txt")
    _manifest(exp, "uq", out / f"uq_{name}.manifest.json", method=method.value, n_train=exp.uq.n_train,
              n_model_evals=summary.n_model_evals, wall_time_s=round(time.perf_counter() - t0, 3))
    return EXIT_OK


def cmd_mc(exp: ExperimentConfig, args) -> int:
    out = _out(exp)
    t0 = time.perf_counter()
    ref = _reference(exp)
    ref.to_csv(out / "mc_reference.csv")
    _manifest(exp, "mc", out / "mc_reference.manifest.json", n_mc=exp.uq.n_mc_reference,
              wall_time_s=round(time.perf_counter() - t0, 3))
    return EXIT_OK


def cmd_compare(exp: ExperimentConfig, args) -> int:
    out = _out(exp)
    ref = _reference(exp)
    methods = [Method.parse(args.method)] if args.method else list(exp.uq.methods)
    rows = []
    for t in range(exp.uq.trials):
        seed = exp.seed + 1 + t
        samples = None
        if any(m is not Method.MC for m in methods):
            samples = training_set(exp, exp.uq.n_train, seed)
        for m in methods:
            if m is Method.MC:
                summary = ref  # Monte Carlo against itself
                n_terms = 0
            else:
                model, summary = run_uq_pipeline(
                    exp.terrain, exp.input_space, exp.pwe, m, exp.uq.n_train, seed, samples=samples,
                    n_surrogate_mc=exp.uq.n_surrogate_mc, standard_order=exp.uq.standard_order,
                    sparse_order=exp.uq.sparse_order, apce=exp.uq.apce)
                n_terms = model.n_terms
            e = relative_errors(summary, ref)
            rows.append((t, seed, m.value, n_terms, e.e_mean, e.e_q05, e.e_q95))
    _write_rows(out / "compare_trials.csv", ["trial", "seed", "method", "n_terms", "e_mean", "e_q05", "e_q95"],
                rows)
    summary_rows = []
    for m in methods:
        E = np.array([r[4:] for r in rows if r[2] == m.value])
        for j, metric in enumerate(("e_mean", "e_q05", "e_q95")):
            summary_rows.append((m.value, metric, E[:, j].min(), E[:, j].max(), E[:, j].mean()))
    _write_rows(out / "compare_summary.csv", ["method", "metric", "min", "max", "mean"], summary_rows)
    _manifest(exp, "compare", out / "compare.manifest.json", trials=exp.uq.trials, n_train=exp.uq.n_train,
              methods=[m.value for m in methods], n_mc_reference=exp.uq.n_mc_reference)
    return EXIT_OK


def convergence_rows(exp: ExperimentConfig, levels, trials):
    rows = []
    for n in levels:
        for t in range(trials):
            seed = exp.seed + 1 + t
            model = fit_surrogate(training_set(exp, n, seed), exp.input_space, Method.APCE, apce=exp.uq.apce)
            rows.append((n, t, seed, model.loocv_error, model.n_terms, model.basis.max_total_order,
                         model.basis.max_interaction_order))
    return rows


def cmd_convergence(exp: ExperimentConfig, args) -> int:
    out = _out(exp)
    rows = convergence_rows(exp, exp.uq.train_levels, exp.uq.trials)
    _write_rows(out / "convergence_trials.csv",
                ["n_train", "trial", "seed", "loocv_error", "n_terms", "max_order", "max_interaction"], rows)
    agg = []
    for n in exp.uq.train_levels:
        R = np.array([r[3:] for r in rows if r[0] == n], dtype=float)
        agg.append((n, R[:, 0].mean(), R[:, 0].min(), R[:, 0].max(), R[:, 0].std(ddof=1) if len(R) > 1 else 0.0,
                    R[:, 1].mean(), int(R[:, 1].min()), int(R[:, 1].max()), int(R[:, 2].max()), int(R[:, 3].max())))
    _write_rows(out / "convergence.csv",
                ["n_train", "loocv_mean", "loocv_min", "loocv_max", "loocv_std", "n_terms_mean", "n_terms_min",
                 "n_terms_max", "max_order", "max_interaction"], agg)
    _manifest(exp, "convergence", out / "convergence.manifest.json", trials=exp.uq.trials,
              levels=list(exp.uq.train_levels))
    return EXIT_OK


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{v:.9g}"
    return str(v)


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


COMMANDS = {
    "simulate": cmd_simulate,
    "sample": cmd_sample,
    "fit": cmd_fit,
    "uq": cmd_uq,
    "mc": cmd_mc,
    "compare": cmd_compare,
    "convergence": cmd_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="terrainuq", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__name__.replace("cmd_", ""))
        p.add_argument("--config", required=True, help="experiment INI file")
        p.add_argument("--seed", type=int, help="override [experiment] seed")
        p.add_argument("--workers", type=int, help="parallel PE evaluations (default: all cores)")
        p.add_argument("--out", help="override [experiment] output_dir")
        p.add_argument("--method", choices=["mc", "standard", "sparse", "apce"], help="override [uq] method")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "sample":
            p.add_argument("-n", type=int, help="design size (default [uq] n_train)")
        if name == "fit":
            p.add_argument("--samples", help="sample CSV (default <out>/samples.csv)")
    return parser


def _apply_overrides(exp: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigurationError("--workers must be >= 1")
        changes["workers"] = args.workers
    if args.out:
        changes["output_dir"] = Path(args.out)
    if args.method and args.command != "compare":
        changes["uq"] = replace(exp.uq, method=Method.parse(args.method))
    return exp.replace(**changes) if changes else exp


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        exp = _apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](exp, args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PartialSampleFailure as exc:
        print(f"partial sample failure: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except (SimulationError, RankDeficiencyError, IllPosedLOOError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
