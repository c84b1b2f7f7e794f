import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from echeuristic import cli
from echeuristic.config import ConfigError, ExperimentConfig, load_config, parse_config, parse_floats
from echeuristic.critical_variance import latitude_circle_embedding

GOOD = """
[covariance]
family = squared_exponential   ; comment
params = 1.0
normalize = true

[space]
shape = interval
dims = 5

[grid]
n_grid = 1024
pad_factor = 4

[mc]
n_paths = 20_000
seed = 42
u_grid = 1.0, 1.5 2.0
workers = 2

[fit]
min_signal_k = 3
tol_exp = 0.15
"""


def test_parse_full_config():
    cfg = parse_config(GOOD)
    assert cfg == ExperimentConfig("squared_exponential", (1.0,), "interval", (5.0,), (1.0, 1.5, 2.0),
                                   True, 20_000, 1024, 4, 42, 3.0, 0.15, 2)


def test_defaults_apply_when_sections_are_missing():
    cfg = parse_config("[covariance]\nfamily=squared_exponential\nparams=2\n[space]\nshape=box\n"
                       "dims=2 3\n[mc]\nu_grid=2\n")
    assert (cfg.n_paths, cfg.n_grid, cfg.pad_factor, cfg.master_seed) == (100_000, 4096, 4, 0)
    assert (cfg.min_signal_k, cfg.tol_exp, cfg.normalize) == (3.0, 0.15, True)
    assert cfg.space().lambda2 == pytest.approx(1.0)


@pytest.mark.parametrize(
    "edit",
    [
        ("[fit]", "[fitting]"),
        ("tol_exp = 0.15", "tolerance = 0.15"),
        ("u_grid = 1.0, 1.5 2.0", "u_grid = 2.0, 1.0"),
        ("u_grid = 1.0, 1.5 2.0", "u_grid = 0.0, 1.0"),
        ("u_grid = 1.0, 1.5 2.0", "u_grid = 1.0, x"),
        ("n_paths = 20_000", "n_paths = 9999"),
        ("family = squared_exponential", "family = matern"),
        ("normalize = true", "normalize = maybe"),
        ("shape = interval", "shape = sphere"),
        ("dims = 5", "dims = 5 6"),
        ("family = squared_exponential   ; comment\n", ""),
        ("[space]", "[space]\n[space]"),
    ],
)
def test_invalid_configs(edit):
    with pytest.raises(ConfigError):
        parse_config(GOOD.replace(*edit))


def test_parse_floats_and_missing_file(tmp_path):
    assert parse_floats(" 1, 2\t3 ") == (1.0, 2.0, 3.0)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


def test_overrides_are_validated():
    cfg = parse_config(GOOD)
    assert cfg.with_overrides(master_seed=7, n_paths=None).master_seed == 7
    with pytest.raises(ConfigError):
        cfg.with_overrides(n_paths=5)


# -- CLI ----------------------------------------------------------------------------------------


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_approx_csv(capsys):
    code, out, _ = run(["approx", "--shape", "box", "--dims", "2,3", "--u", "1,2"], capsys)
    assert code == 0
    rows = list(csv.reader(out.splitlines()))
    assert rows[0] == ["u", "term_0", "term_1", "term_2", "p_hat"]
    assert float(rows[2][0]) == 2.0
    assert float(rows[2][-1]) == pytest.approx(sum(map(float, rows[2][1:4])), rel=1e-14)


def test_approx_from_config_uses_lambda2(tmp_path, capsys):
    path = tmp_path / "c.ini"
    path.write_text(GOOD.replace("params = 1.0", "params = 0.5").replace("normalize = true", "normalize = false"))
    code, out, _ = run(["--config", path, "--format", "json", "approx"], capsys)
    assert code == 0
    rows = json.loads(out)
    assert rows[0]["term_1"] == pytest.approx(10 / (2 * math.pi) * math.exp(-0.5))


def test_sigma_from_flags(capsys):
    code, out, _ = run(["sigma", "--family", "squared_exponential", "--params", "1", "--shape", "interval",
                        "--dims", "5"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["sigma_c_sq"] == pytest.approx(2.0)
    assert rep["attained_locally"] is True
    assert set(rep) >= {"sigma_c_sq", "argmax_t", "attained_locally", "exponent", "theta_c", "method"}


def test_sigma_for_degenerate_process_writes_infinite_sentinel(tmp_path, capsys):
    code, _, _ = run(["sigma", "--family", "cosine_mixture", "--params", "1,1", "--shape", "interval",
                      "--dims", str(math.pi), "--out", tmp_path], capsys)
    rep = json.loads((tmp_path / "sigma.json").read_text())
    assert code == 0 and rep["exponent"] == "inf" and rep["sigma_c_sq"] == pytest.approx(0.0, abs=1e-12)


def test_sigma_from_finite_kl_grid_file(tmp_path, capsys):
    m = latitude_circle_embedding(0.5, 256)
    np.savetxt(tmp_path / "phi.txt", m.phi, fmt="%.17g")
    code, out, _ = run(["sigma", "--finite-kl", tmp_path / "phi.txt"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["sigma_c_sq"] == pytest.approx(3.0, abs=1e-6)
    assert rep["method"] == "finite-KL"


def test_simulate_columns(tmp_path, capsys):
    path = tmp_path / "c.ini"
    path.write_text(GOOD)
    code, _, _ = run(["simulate", "--config", path, "--n-paths", 10_000, "--out", tmp_path], capsys)
    assert code == 0
    rows = list(csv.reader((tmp_path / "simulate.csv").read_text().splitlines()))
    assert rows[0] == ["u", "mean_ec", "se_ec", "tail_estimate", "se_tail", "n_paths"]
    assert len(rows) == 4 and rows[1][-1] == "10000"


def test_validate_writes_contract_files(tmp_path, capsys):
    path = tmp_path / "c.ini"
    path.write_text(GOOD.replace("n_paths = 20_000", "n_paths = 100_000")
                    .replace("u_grid = 1.0, 1.5 2.0", "u_grid = 1.5, 2.0, 2.5"))
    out = tmp_path / "out"
    code, _, err = run(["--config", path, "--out", out, "validate", "--no-timing"], capsys)
    assert code == 0, err
    rows = list(csv.reader((out / "diff.csv").read_text().splitlines()))
    assert rows[0] == ["u", "diff_mean", "diff_se", "ec_mean", "tail_est", "n"]
    rep = json.loads((out / "validate.json").read_text())
    assert list(rep) == ["sigma_c_sq", "attained_locally", "argmax_t", "bound", "slope", "slope_se",
                         "points_used", "verdict", "seed", "runtime_s"]
    assert rep["runtime_s"] is None and rep["seed"] == 42 and rep["verdict"] is True


def test_exit_codes(tmp_path, capsys):
    path = tmp_path / "c.ini"
    path.write_text(GOOD.replace("u_grid = 1.0, 1.5 2.0", "u_grid = 4.5, 5, 5.5"))
    assert run(["validate", "--config", path, "--out", tmp_path], capsys)[0] == 3
    bad = tmp_path / "bad.ini"
    bad.write_text(GOOD + "\n[extra]\nkey = 1\n")
    assert run(["validate", "--config", bad], capsys)[0] == 2
    assert run(["sigma"], capsys)[0] == 2
    code, _, err = run(["simulate", "--family", "cosine_mixture", "--params", "0.5,0.5,1,1.7", "--shape",
                        "interval", "--dims", "3", "--u", "1", "--n-paths", 10_000, "--n-grid", 1024], capsys)
    assert code == 4 and "sampler" in err


def test_seed_must_fit_in_64_bits(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--seed", str(2**64), "sigma"])
    capsys.readouterr()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "echeuristic", "approx", "--shape", "interval", "--dims", "5",
                           "--u", "2"], capture_output=True, text=True, check=True)
    assert proc.stdout.splitlines()[0] == "u,term_0,term_1,p_hat"
