"""Numbered acceptance criteria, each checked at its stated tolerance and time budget.

The summary printed at the end of a pytest run lists one PASS/FAIL line per
criterion.  The two PE studies (9 and 10) cache their Monte Carlo reference
and training sets under ``<repo>/.cache`` and reuse them on later runs.
"""
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import special

from oracles import beam_width, brute_force_loo, centred_beam, gaussian_width, knife_edge_errors
from terrainuq import cli
from terrainuq.apce import ApceConfig, ApceState, extend_basis, fit_apce
from terrainuq.experiment import load_config
from terrainuq.pce import (MultiIndexSet, PceModel, fit_standard_pce, loocv_error, regression_matrix,
                           total_order_set)
from terrainuq.pwe import PweConfig, step_forward
from terrainuq.stochastic import (InputSpace, RandomInputSpec, SampleSet, beta_inverse_cdf, beta_pdf, lhs_sample,
                                  antenna_input_space, univariate_table)
from terrainuq.uqstats import Method, relative_errors, run_uq_pipeline, surrogate_mean, surrogate_percentiles

ROOT = Path(__file__).resolve().parents[1]
DESK = ROOT / "configs" / "desk_wedge.ini"


def acceptance(number, title):
    return pytest.mark.acceptance(number, title)


@pytest.fixture(scope="module")
def desk():
    # caches land in <repo>/.cache; digest() ignores output_dir so keys are unaffected
    return load_config(DESK).replace(output_dir=ROOT)


# ---------------------------------------------------------------------------

@acceptance(1, "total-order basis cardinalities")
def test_criterion_01_basis_cardinalities(criterion):
    sizes = [len(total_order_set(5, o)) for o in range(1, 8)]
    criterion.note(f"sizes {sizes}")
    assert sizes == [6, 21, 56, 126, 252, 462, 792]
    assert criterion.elapsed() < 1.0


@acceptance(2, "Jacobi orthonormality under Gauss-Jacobi quadrature")
def test_criterion_02_jacobi_orthonormality(criterion):
    spec = RandomInputSpec("x", 3.0, 3.0, 0.0, 1.0)
    t, w = special.roots_jacobi(64, spec.beta - 1, spec.alpha - 1)
    x = (t + 1) / 2
    V = univariate_table(8, x, spec)
    gram = (V * (w / w.sum())) @ V.T
    err = np.abs(gram - np.eye(9)).max()
    criterion.note(f"max |G - I| = {err:.2e}")
    assert err <= 1e-9
    assert criterion.elapsed() < 1.0


@acceptance(3, "hat-matrix LOO equals explicit refits")
def test_criterion_03_loo_oracle(criterion):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(8, 31))
        p = int(rng.integers(1, n - 2))
        P = rng.normal(size=(n, p))
        q = rng.normal(size=n)
        a, b = loocv_error(P, q), brute_force_loo(P, q)
        worst = max(worst, abs(a - b) / b)
    criterion.note(f"max relative difference {worst:.2e}")
    assert worst <= 1e-10
    assert criterion.elapsed() < 5.0


@acceptance(4, "standard PCE recovers a polynomial in its span")
def test_criterion_04_polynomial_exactness(criterion):
    space = antenna_input_space()
    worst = 0.0
    for order in (2, 3):
        basis = total_order_set(5, order)
        n_s = 2 * len(basis)
        xi = lhs_sample(space, n_s, order)
        coeffs = np.random.default_rng(order).normal(size=(len(basis), 3)) + 80.0
        q = regression_matrix(basis, xi, space) @ coeffs
        m = fit_standard_pce(SampleSet(xi, q, order), space, order)
        worst = max(worst, m.loocv_error)
    criterion.note(f"max LOO error {worst:.2e}")
    assert worst <= 1e-8
    assert criterion.elapsed() < 5.0


@acceptance(5, "free-space Gaussian beam width and norm conservation")
def test_criterion_05_free_space(criterion):
    cfg = PweConfig(delta_height_m=0.25, frequency_hz=435e6)
    w0 = 2.0
    y, u = centred_beam(w0)
    z, drift = 0.0, 0.0
    for _ in range(40):
        v = step_forward(u, cfg, 5.0)
        drift = max(drift, abs(np.linalg.norm(v) / np.linalg.norm(u) - 1))
        u, z = v, z + 5.0
    rel = abs(beam_width(y, u) / gaussian_width(w0, z, cfg.k0) - 1)
    criterion.note(f"width error {rel:.2%}, norm drift {drift:.1e}")
    assert rel <= 0.01
    assert drift <= 1e-12
    assert criterion.elapsed() < 10.0


@acceptance(6, "knife-edge excess loss against the Fresnel integral")
def test_criterion_06_knife_edge(criterion):
    nu, err = knife_edge_errors()
    criterion.note(f"max |error| {np.abs(err).max():.2f} dB over nu in [{nu.min():.2f}, {nu.max():.2f}]")
    assert nu.min() < 0.3 and nu.max() > 1.9
    assert np.abs(err).max() <= 1.5
    assert criterion.elapsed() < 60.0


@acceptance(7, "adaptive basis growth hand trace and downward closure")
def test_criterion_07_hand_trace(criterion):
    cfg = ApceConfig()
    state = ApceState.initial(2)
    delta, state, alpha = extend_basis({}, state, cfg)
    assert (alpha, list(delta)) == ((0, 0), [(1, 0), (0, 1)])
    delta, state, alpha = extend_basis({(1, 0): 2.0, (0, 1): 1.0}, state, cfg)
    assert (alpha, list(delta)) == ((1, 0), [(2, 0)])
    delta, state, alpha = extend_basis({(0, 1): 1.0}, state, cfg)
    assert (alpha, list(delta)) == ((0, 1), [(1, 1), (0, 2)])

    rng = np.random.default_rng(7)
    state = ApceState.initial(5)
    steps = 0
    for _ in range(50):
        delta, state, _ = extend_basis({a: rng.random() for a in state.cand_set}, state, cfg)
        assert state.old_set.is_downward_closed()
        steps += 1
    criterion.note(f"{steps} random steps, final old set {len(state.old_set)} terms")
    assert criterion.elapsed() < 5.0


def synthetic_qoi(xi, space):
    """Smooth anisotropic stand-in for a path-loss trace with 12 range points."""
    z = (xi - space.lower) / (space.upper - space.lower)
    r = np.linspace(0.5, 2.0, 12)
    base = 100 + 20 * np.log10(r)
    return (base + 3.0 * z[:, :1] * r + 2.0 * np.sin(2.5 * z[:, 1:2]) * r ** 0.5
            + 1.5 * (z[:, 2:3] - 0.5) ** 2 + 0.4 * z[:, 3:4] * z[:, 4:5] + 0.2 * np.exp(z[:, 0:1] * z[:, 2:3]))


@acceptance(8, "termination structure over sample sizes and seeds")
def test_criterion_08_termination_structure(criterion):
    space = antenna_input_space()
    worst_ratio, worst_order = 0.0, 0
    for n_s in range(10, 101, 10):
        for seed in range(10):
            xi = lhs_sample(space, n_s, 1000 + seed)
            m = fit_apce(SampleSet(xi, synthetic_qoi(xi, space), seed), space)
            assert m.n_terms <= 0.5 * n_s
            assert m.basis.max_total_order <= 5
            if n_s == 10:
                assert list(m.basis) == [(0,) * 5]
            worst_ratio = max(worst_ratio, m.n_terms / n_s)
            worst_order = max(worst_order, m.basis.max_total_order)
    criterion.note(f"max N_p/N_s {worst_ratio:.2f}, max order {worst_order}")
    assert criterion.elapsed() < 120.0


@acceptance(9, "desk-scale wedge study: errors and method ordering")
@pytest.mark.slow
def test_criterion_09_desk_wedge_errors(desk, criterion):
    reference = cli._reference(desk)
    assert reference.n_model_evals == 10_000
    errs = {m: [] for m in (Method.STANDARD, Method.SPARSE, Method.APCE)}
    for t in range(desk.uq.trials):
        seed = desk.seed + 1 + t
        samples = cli.training_set(desk, 30, seed)
        for m in errs:
            _, summary = run_uq_pipeline(desk.terrain, desk.input_space, desk.pwe, m, 30, seed, samples=samples,
                                         n_surrogate_mc=desk.uq.n_surrogate_mc, apce=desk.uq.apce)
            e = relative_errors(summary, reference)
            errs[m].append((e.e_mean, e.e_q05, e.e_q95))
    worst = {m: np.max(v, axis=0) for m, v in errs.items()}
    a = worst[Method.APCE]
    criterion.note("max (mean, q05, q95) " + "; ".join(
        f"{m.value} {w[0]:.2e} {w[1]:.2e} {w[2]:.2e}" for m, w in worst.items()))
    assert len(errs[Method.APCE]) == 10
    assert a[0] <= 0.02 and a[1] <= 0.05 and a[2] <= 0.05
    for other in (Method.STANDARD, Method.SPARSE):
        assert a[1] <= worst[other][1] and a[2] <= worst[other][2]
    assert criterion.elapsed() < 2 * 3600


@acceptance(10, "LOO error decreases with training-set size")
@pytest.mark.slow
def test_criterion_10_convergence_trend(desk, criterion):
    levels = range(20, 101, 10)
    mean, sd = [], []
    for n in levels:
        errs = [fit_apce(cli.training_set(desk, n, desk.seed + 1 + t), desk.input_space, desk.uq.apce).loocv_error
                for t in range(10)]
        mean.append(np.mean(errs))
        sd.append(np.std(errs, ddof=1))
    criterion.note("mean LOO " + " ".join(f"{m:.2e}" for m in mean))
    for k in range(len(mean) - 1):
        pooled = math.sqrt((sd[k] ** 2 + sd[k + 1] ** 2) / 2)
        assert mean[k + 1] <= mean[k] + pooled, f"rise from N_s={levels[k]} to {levels[k + 1]}"
    assert criterion.elapsed() < 30 * 60


@acceptance(11, "surrogate mean and percentile oracles")
def test_criterion_11_statistics(criterion):
    space5 = antenna_input_space()
    basis = total_order_set(5, 2)
    coeffs = np.random.default_rng(11).normal(size=(len(basis), 4))
    assert np.array_equal(surrogate_mean(PceModel(basis, coeffs, space5, 0.0)), coeffs[0])

    spec = space5[0]
    space = InputSpace([spec])
    # c0 + c1 psi_1 + c2 psi_2 with a small quadratic part is monotone on the support
    model = PceModel(MultiIndexSet([(0,), (1,), (2,)]), np.array([[50.0], [4.0], [0.3]]), space, 0.0)
    grid = np.linspace(spec.lower, spec.upper, 201)[:, None]
    g = model.evaluate(grid)[:, 0]
    slope = np.sign(g[-1] - g[0])
    assert np.all(slope * np.diff(g) > 0)

    n_mc = 100_000
    pct = surrogate_percentiles(model, space, n_mc, levels=(0.05, 0.95))
    worst = 0.0
    for p in (0.05, 0.95):
        x_p = beta_inverse_cdf(p if slope > 0 else 1 - p, spec)
        exact = model.evaluate(np.array([[x_p]]))[0, 0]
        h = 1e-6 * spec.width
        dg = abs(model.evaluate(np.array([[x_p + h]]))[0, 0] - model.evaluate(np.array([[x_p - h]]))[0, 0]) / (2 * h)
        se = math.sqrt(p * (1 - p) / n_mc) * dg / beta_pdf(x_p, spec)
        worst = max(worst, abs(pct[p][0] - exact) / se)
        assert abs(pct[p][0] - exact) <= 4 * se
    criterion.note(f"max quantile deviation {worst:.2f} standard errors")
    assert criterion.elapsed() < 10.0
