import csv
import json
from pathlib import Path

import numpy as np
import pytest

import terrainuq.cli as cli
from terrainuq.errors import ConfigurationError
from terrainuq.experiment import load_config, parse_config
from terrainuq.pce import PceModel
from terrainuq.stochastic import SampleSet, lhs_sample

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

INPUTS = """
[input.tx_height_m]
lower = 9
upper = 13
[input.rx_height_m]
lower = 1
upper = 4
[input.elevation_deg]
lower = -3
upper = 3
[input.beamwidth_deg]
lower = 4
upper = 12
[input.frequency_hz]
lower = 410e6
upper = 460e6
"""


ONE_INPUT = "[input.tx_height_m]\nlower = 9\nupper = 13"


def write_config(tmp_path, body="", inputs=ONE_INPUT, uq="", antenna=""):
    text = f"""
[experiment]
output_dir = out
seed = 3
workers = 1

[terrain]
generator = flat
length_m = 1000

[pwe]
delta_range_m = 50
delta_height_m = 1.0
max_height_m = 128
total_range_m = 1000
near_field_steps = 2
{body}
{antenna}
{inputs}

[uq]
n_train = 8
n_mc_reference = 50
n_surrogate_mc = 2000
trials = 2
train_levels = 8, 10
{uq}
"""
    path = tmp_path / "exp.ini"
    path.write_text(text)
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# configuration parsing

def test_shipped_configs_parse():
    for path in CONFIGS.glob("*.ini"):
        exp = load_config(path)
        assert exp.input_space.dim >= 1
        assert exp.digest() == load_config(path).digest()


def test_config_defaults_and_paths(tmp_path):
    exp = load_config(write_config(tmp_path))
    assert exp.output_dir == tmp_path / "out"
    assert exp.antenna_nominal.rx_height_m == 2.5
    assert exp.antenna_nominal.frequency_hz == exp.pwe.frequency_hz
    assert exp.pwe.ground.is_pec
    assert exp.uq.train_levels == (8, 10)


def test_terrain_file_relative_to_config(tmp_path):
    (tmp_path / "profile.csv").write_text("range_m,elevation_m\n0,0\n500,20\n1000,0\n")
    path = write_config(tmp_path)
    path.write_text(path.read_text().replace("generator = flat\nlength_m = 1000", "file = profile.csv"))
    exp = load_config(path)
    assert exp.terrain(500.0) == pytest.approx(20.0)


@pytest.mark.parametrize("patch, needle", [
    ("[bogus]\nx = 1", "unknown section [bogus]"),
    ("[pwe]\nmystery = 3", "mystery"),
    ("[pwe]\nground = clay", "ground"),
    ("[pwe]\ndelta_range_m = abc", "delta_range_m"),
    ("[input.gain_db]\nlower = 0\nupper = 1", "gain_db"),
])
def test_config_errors_name_the_field(tmp_path, patch, needle):
    text = write_config(tmp_path).read_text()
    section = patch.split("\n", 1)[0]
    if section in text:
        text = text.replace(section, patch)
    else:
        text += "\n" + patch + "\n"
    with pytest.raises(ConfigurationError) as info:
        parse_config(text, tmp_path, "exp.ini")
    assert needle in str(info.value)
    assert str(info.value).startswith("exp.ini")


def test_config_missing_terrain_and_inputs(tmp_path):
    with pytest.raises(ConfigurationError, match="terrain"):
        parse_config("[input.tx_height_m]\nlower=9\nupper=13\n", tmp_path)
    with pytest.raises(ConfigurationError, match="input"):
        parse_config("[terrain]\ngenerator = flat\n", tmp_path)


def test_apce_fields_in_uq_section(tmp_path):
    exp = load_config(write_config(tmp_path, uq="max_poly_order = 3\nstagnation_limit = 2\nmethods = mc apce"))
    assert exp.uq.apce.max_poly_order == 3 and exp.uq.apce.stagnation_limit == 2
    assert [m.value for m in exp.uq.methods] == ["MC", "APCE"]


# ---------------------------------------------------------------------------
# commands

def test_simulate_is_deterministic(tmp_path):
    cfg = write_config(tmp_path)
    assert cli.main(["simulate", "--config", str(cfg)]) == 0
    first = (tmp_path / "out" / "path_loss.csv").read_bytes()
    assert cli.main(["simulate", "--config", str(cfg)]) == 0
    assert (tmp_path / "out" / "path_loss.csv").read_bytes() == first
    rows = read_csv(tmp_path / "out" / "path_loss.csv")
    r = [float(x["range_m"]) for x in rows]
    assert all(b > a for a, b in zip(r, r[1:]))
    meta = json.loads((tmp_path / "out" / "path_loss.manifest.json").read_text())
    assert meta["command"] == "simulate" and meta["n_points"] == len(rows)


def test_simulate_reference_config_resolution(tmp_path):
    assert cli.main(["simulate", "--config", str(CONFIGS / "jerslev_like.ini"), "--out", str(tmp_path)]) == 0
    assert len(read_csv(tmp_path / "path_loss.csv")) > 90


def test_sample_single_row(tmp_path):
    cfg = write_config(tmp_path)
    assert cli.main(["sample", "--config", str(cfg), "-n", "1"]) == 0
    s = SampleSet.from_csv(tmp_path / "out" / "samples.csv")
    assert s.xi.shape == (1, 1) and np.isfinite(s.q).all()
    assert not (tmp_path / "out" / "samples.partial").exists()


def test_sample_resumes_after_interruption(tmp_path, monkeypatch):
    exp = load_config(write_config(tmp_path))
    clean = tmp_path / "clean.csv"
    cli.sample_design(exp, 6, 5, clean, chunk=2)

    calls = {"n": 0}
    real = cli.evaluate_design

    def flaky(*a, **k):
        calls["n"] += 1
        if calls["n"] == 2:
            raise KeyboardInterrupt
        return real(*a, **k)

    target = tmp_path / "resumed.csv"
    monkeypatch.setattr(cli, "evaluate_design", flaky)
    with pytest.raises(KeyboardInterrupt):
        cli.sample_design(exp, 6, 5, target, chunk=2)
    journal = target.with_suffix(".partial")
    assert len(journal.read_text().splitlines()) == 3  # tag and two finished rows
    monkeypatch.setattr(cli, "evaluate_design", real)
    cli.sample_design(exp, 6, 5, target, chunk=2)
    assert target.read_bytes() == clean.read_bytes()
    assert not journal.exists()


def five_d_samples(tmp_path, q):
    cfg = write_config(tmp_path, inputs=INPUTS)
    exp = load_config(cfg)
    xi = lhs_sample(exp.input_space, len(q), 0)
    path = tmp_path / "train.csv"
    SampleSet(xi, q, 0).to_csv(path, exp.input_space)
    return cfg, path, exp


def test_fit_apce_constant_and_standard_size(tmp_path):
    cfg, path, exp = five_d_samples(tmp_path, np.full((30, 3), 90.0))
    assert cli.main(["fit", "--config", str(cfg), "--samples", str(path), "--method", "apce"]) == 0
    m = PceModel.load(tmp_path / "out" / "model_apce.txt", exp.input_space)
    assert m.n_terms == 1
    trace = read_csv(tmp_path / "out" / "trace_apce.csv")
    assert all(int(r["n_terms"]) <= 15 for r in trace)

    q = np.random.default_rng(0).normal(size=(30, 2))
    cfg, path, exp = five_d_samples(tmp_path, q)
    assert cli.main(["fit", "--config", str(cfg), "--samples", str(path), "--method", "standard"]) == 0
    assert PceModel.load(tmp_path / "out" / "model_standardpce.txt", exp.input_space).n_terms == 21


def test_fit_without_samples_is_a_config_error(tmp_path):
    assert cli.main(["fit", "--config", str(write_config(tmp_path))]) == 2


def test_uq_and_mc_and_compare(tmp_path):
    cfg = str(write_config(tmp_path))
    assert cli.main(["uq", "--config", cfg, "--method", "standard"]) == 0
    rows = read_csv(tmp_path / "out" / "uq_standardpce.csv")
    assert list(rows[0]) == ["range_m", "mean_db", "q05_db", "q95_db"]
    assert cli.main(["mc", "--config", cfg]) == 0
    assert cli.main(["compare", "--config", cfg, "--method", "mc"]) == 0
    summary = read_csv(tmp_path / "out" / "compare_summary.csv")
    assert {r["metric"] for r in summary} == {"e_mean", "e_q05", "e_q95"}
    assert all(float(r["max"]) == 0.0 for r in summary)


def test_convergence_command(tmp_path):
    cfg = str(write_config(tmp_path))
    assert cli.main(["convergence", "--config", cfg]) == 0
    rows = read_csv(tmp_path / "out" / "convergence.csv")
    assert [int(r["n_train"]) for r in rows] == [8, 10]
    assert all(int(r["n_terms_max"]) <= int(r["n_train"]) // 2 for r in rows)


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[terrain]\ngenerator = volcano\n")
    assert cli.main(["simulate", "--config", str(bad)]) == 2
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.ini")]) == 2

    high_rx = write_config(tmp_path, antenna="[antenna]\nrx_height_m = 500")
    assert cli.main(["simulate", "--config", str(high_rx)]) == 3

    wide = write_config(tmp_path, inputs="[input.rx_height_m]\nlower = 1\nupper = 1000")
    assert cli.main(["sample", "--config", str(wide), "-n", "4"]) == 4
