"""Mean and 90 % reliability band of path loss on the desk-scale wedge.

Run from the repository root::

    python tutorials/04_desk_scale_uq_study.py [--n-mc 2000]

The first run builds a Monte Carlo reference and caches it under ``.cache``.
Thirty PE runs then train each surrogate, and its statistics are compared
with the reference.  The CLI equivalent is
``terrainuq compare --config configs/desk_wedge.ini``.
"""
import argparse
from pathlib import Path

from terrainuq import cli
from terrainuq.experiment import load_config
from terrainuq.uqstats import Method, mc_reference, relative_errors, run_uq_pipeline

ROOT = Path(__file__).resolve().parents[1]

parser = argparse.ArgumentParser()
parser.add_argument("--n-mc", type=int, default=10_000, help="Monte Carlo reference size")
parser.add_argument("--seed", type=int, default=1)
args = parser.parse_args()

exp = load_config(ROOT / "configs" / "desk_wedge.ini").replace(output_dir=ROOT)
ref = mc_reference(exp.terrain, exp.input_space, exp.pwe, args.n_mc, exp.seed, exp.antenna_nominal,
                   exp.workers, ROOT / ".cache")
samples = cli.training_set(exp, 30, args.seed)

print(f"{'method':12s} {'terms':>5} {'e_mean':>9} {'e_q05':>9} {'e_q95':>9}")
for method in (Method.STANDARD, Method.SPARSE, Method.APCE):
    model, summary = run_uq_pipeline(exp.terrain, exp.input_space, exp.pwe, method, 30, args.seed,
                                     samples=samples, apce=exp.uq.apce)
    e = relative_errors(summary, ref)
    print(f"{method.value:12s} {model.n_terms:5d} {e.e_mean:9.2e} {e.e_q05:9.2e} {e.e_q95:9.2e}")

print(f"\n{'range m':>8} {'q05 dB':>8} {'mean dB':>8} {'q95 dB':>8}   (Monte Carlo, n = {args.n_mc})")
for r, a, m, b in zip(ref.ranges_m, ref.q05_db, ref.mean_db, ref.q95_db):
    print(f"{r:8.0f} {a:8.2f} {m:8.2f} {b:8.2f}")
