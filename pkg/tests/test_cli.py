import json
import subprocess
import sys

import numpy as np
import pytest

from perronhjb.cli import main
from perronhjb.config import DEFAULTS, ExperimentConfig
from perronhjb.errors import ValidationError


def _cfg(tmp_path, d, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(d))
    return str(path)


def _read(path):
    return json.loads(path.read_text())


# ---- config


def test_defaults_are_reference_parameters():
    cfg = ExperimentConfig.from_dict()
    assert cfg.params.rates == (0.5, 5.0, 1.0, 2.0)
    assert (cfg.params.a, cfg.params.A) == (1.0, 6.0)
    assert cfg.numerics["dy"] == 1e-2 and cfg.numerics["dt"] == 1e-3 and cfg.numerics["T"] == 10.0


def test_config_overrides_and_matrices():
    cfg = ExperimentConfig.from_dict({"model": {"rates": {"tau2": 0.5}}, "bounds": {"A": 4.0}})
    assert cfg.params.rates == (0.5, 0.5, 1.0, 2.0) and cfg.params.A == 4.0
    G = [[-1, 0, 0], [1, -1, 0], [0, 1, 0]]
    F = [[-1, 0, 1], [1, -1, 0], [0, 1, -1]]
    cfg = ExperimentConfig.from_dict({"model": {"G": G, "F": F, "m": [1, 1, 1]}})
    assert np.array_equal(cfg.params.G, G) and cfg.params.rates is None


@pytest.mark.parametrize("bad", [
    {"bounds": {"a": 5, "A": 1}},
    {"numerics": {"dy": -1}},
    {"numerics": {"eps": []}},
    {"numerics": {"seed": -3}},
    {"outputs": {"format": "xml"}},
    {"model": {"rates": {"tau1": "x"}}},
    {"model": {"G": [[1, 2], [3, 4]], "F": [[0]]}},
    {"nonsense": {}},
])
def test_bad_config(bad):
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict(bad)


def test_load_missing_file(tmp_path):
    with pytest.raises(ValidationError):
        ExperimentConfig.load(tmp_path / "nope.json")


# ---- commands


def test_perron_command(tmp_path):
    assert main(["perron", "--out", str(tmp_path)]) == 0
    s = _read(tmp_path / "perron_optimum.json")
    assert abs(s["alpha_star"] - 3.35) < 0.01 and abs(s["lambda_star"] - 0.7273) < 1e-3
    assert (tmp_path / "perron_curve.csv").read_text().startswith("alpha,lambda,dlambda")


def test_perron_boundary_family(tmp_path):
    cfg = _cfg(tmp_path, {"model": {"rates": {"tau1": 0.5, "tau2": 1.0}}})
    assert main(["perron", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert _read(tmp_path / "perron_optimum.json")["boundary"] == "A"


def test_perron_tail(tmp_path):
    # the tail approaches tau1 = 0.5 from above, slowly (about 2 / alpha here)
    assert main(["perron", "--alpha-max", "100", "--out", str(tmp_path)]) == 0
    s = _read(tmp_path / "perron_optimum.json")
    oracle = np.linalg.eigvals(ExperimentConfig.from_dict().params.matrix(100.0)).real.max()
    assert s["lambda_at_alpha_max"] == pytest.approx(oracle, abs=1e-12)
    assert 0.5 < s["lambda_at_alpha_max"] < 0.52
    assert main(["perron", "--alpha-max", "10000", "--out", str(tmp_path)]) == 0
    assert abs(_read(tmp_path / "perron_optimum.json")["lambda_at_alpha_max"] - 0.5) < 0.01


def test_perron_json_format(tmp_path):
    assert main(["perron", "--format", "json", "--out", str(tmp_path)]) == 0
    t = _read(tmp_path / "perron_curve.json")
    assert t["columns"] == ["alpha", "lambda", "dlambda"] and len(t["rows"]) == 601


def test_deterministic_outputs(tmp_path):
    for d in ("a", "b"):
        assert main(["perron", "--out", str(tmp_path / d)]) == 0
        assert main(["hypotheses", "--seed", "4", "--out", str(tmp_path / d)]) == 0
    for f in ("perron_curve.csv", "perron_optimum.json", "hypotheses.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_floquet_command(tmp_path):
    assert main(["floquet", "--gamma", "square", "--out", str(tmp_path)]) == 0
    r = _read(tmp_path / "floquet.json")
    assert r["constant_gap"] <= 1e-8
    assert abs(r["first_directional"]) <= 1e-5
    assert r["second_rel_gap"] <= 1e-2
    assert r["second_directional_ones"] == pytest.approx(r["d2lambda_P"], abs=1e-10)
    assert (tmp_path / "floquet_sweep.csv").exists()


def test_floquet_constant_control(tmp_path):
    assert main(["floquet", "--alpha", "3.35", "--gamma", "ones", "--out", str(tmp_path)]) == 0
    r = _read(tmp_path / "floquet.json")
    assert r["constant_gap"] <= 1e-8


def test_floquet_bad_samples(tmp_path):
    assert main(["floquet", "--gamma", "samples", "--samples", "1,2", "--out", str(tmp_path)]) == 2


def test_geometry_command(tmp_path):
    assert main(["geometry", "--out", str(tmp_path)]) == 0
    g = _read(tmp_path / "geometry.json")
    assert all(g["hypotheses"].values()) and g["stability"]["ok"]
    assert max(g["endpoint_errors"].values()) <= 1e-6
    assert (tmp_path / "phi0.csv").exists() and (tmp_path / "Z_minus_gamma_lo.csv").exists()


def test_geometry_zero_delta(tmp_path):
    assert main(["geometry", "--delta", "0", "--out", str(tmp_path)]) == 0
    for part in ("gamma_lo", "gamma_hi"):
        assert (tmp_path / f"Z_minus_{part}.csv").read_bytes() == (tmp_path / f"Z0_{part}.csv").read_bytes()


def test_geometry_irreducible_F(tmp_path):
    G = [[-1, 0, 0], [1, -1, 0], [0, 1, 0]]
    F = [[-1, 0, 1], [1, -1, 0], [0, 1, -1]]
    cfg = _cfg(tmp_path, {"model": {"G": G, "F": F, "m": [1, 1, 1]}})
    code = main(["geometry", "--config", cfg, "--out", str(tmp_path)])
    h = _read(tmp_path / "hypotheses.json")
    assert not h["H3"]["passed"]
    assert (tmp_path / "phi0.csv").exists()
    assert code in (0, 4)
    if code == 4:
        assert "error" in _read(tmp_path / "geometry.json")


def test_hypotheses_command(tmp_path):
    assert main(["hypotheses", "--out", str(tmp_path)]) == 0
    h = _read(tmp_path / "hypotheses.json")
    assert h["all_passed"] and h["monotonicity"]["consistent"]


def test_hjb_command_coarse(tmp_path):
    args = ["hjb", "--dy", "0.05", "--dt", "0.01", "--T", "5", "--discounted", "0.1,0.05",
            "--out", str(tmp_path)]
    assert main(args) == 0
    s = _read(tmp_path / "hjb_summary.json")
    assert s["time_dependent"]["cfl"] <= 0.5
    assert len(s["discounted"]) == 2
    assert s["discounted"][0]["spread"] > s["discounted"][1]["spread"]
    for f in ("u_T.csv", "u_T.meta.json", "ubar.csv", "trajectory.csv", "separation_0.csv",
              "discounted_0.1.csv", "discounted_0.05.csv"):
        assert (tmp_path / f).exists(), f
    assert (tmp_path / "u_T.csv").read_text().startswith("i,j,y1,y2,y3,u")


def test_hjb_particular_solution(tmp_path):
    cfg = _cfg(tmp_path, {"model": {"rates": {"tau2": 0.5}}})
    args = ["hjb", "--config", cfg, "--dy", "0.02", "--dt", "0.01", "--T", "5",
            "--particular-solution", "--out", str(tmp_path)]
    assert main(args) == 0
    assert _read(tmp_path / "hjb_summary.json")["particular_solution"]["passed"]


def test_hjb_cfl_exit_code(tmp_path):
    args = ["hjb", "--dy", "0.05", "--dt", "0.01", "--T", "1", "--substeps", "1",
            "--out", str(tmp_path)]
    assert main(args) == 5


def test_config_exit_code(tmp_path):
    cfg = _cfg(tmp_path, {"bounds": {"a": 5, "A": 1}})
    assert main(["perron", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_console_script(tmp_path):
    r = subprocess.run([sys.executable, "-m", "perronhjb.cli", "perron", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["interior"] is True


def test_defaults_document_matches():
    assert DEFAULTS["bounds"] == {"a": 1.0, "A": 6.0}
