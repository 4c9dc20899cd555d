import json
import subprocess
import sys

import pytest

from kreinlab.cli import main

SMALL = """[scenario]
name = tiny
seed = 2

[coefficient]
kind = gaussian
amplitude = 0.3
center = 2
width = 1

[grid]
r_step = 0.01
r_max = 16
k_half_width = 20
k_step = 0.05

[plancherel]
"""


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.scn"
    p.write_text(SMALL)
    return str(p)


def test_krein_identities_json(capsys):
    code = main(["krein", "identities", "--coefficient", "bump", "--r-step", "0.001",
                 "--r-max", "5", "--k-max", "5", "--k-step", "0.5", "--json"])
    out = json.loads(capsys.readouterr().out)
    assert code == 0 and out["pass"]
    assert out["conjugation_residual"] < 1e-7 and out["integral_residual"] < 1e-7


def test_krein_sigma_writes_csv(tmp_path, capsys):
    code = main(["krein", "sigma", "--coefficient", "zero", "--r-max", "2", "--k-max", "50",
                 "--out", str(tmp_path)])
    text = capsys.readouterr().out
    assert code == 0
    assert (tmp_path / "sigma.csv").exists()
    assert "normalization_constant: 0.4936" in text


def test_krein_param_parsing(capsys):
    code = main(["krein", "solve", "--coefficient", "box", "--param", "value=0.2",
                 "--param", "length=1", "--r-max", "2", "--k-max", "2", "--json"])
    out = json.loads(capsys.readouterr().out)
    assert code == 0 and out["params"] == {"value": 0.2, "length": 1.0}
    with pytest.raises(SystemExit):
        main(["krein", "solve", "--param", "novalue"])


def test_run_missing_scenario(capsys):
    assert main(["run", "/nonexistent/x.scn"]) == 2
    assert "scenario error" in capsys.readouterr().err


def test_run_invalid_scenario_names_key(tmp_path, capsys):
    p = tmp_path / "bad.scn"
    p.write_text(SMALL + "tol = -1\n")
    assert main(["run", str(p)]) == 2
    assert "plancherel.tol" in capsys.readouterr().err


def test_run_and_transform(tiny, tmp_path, capsys):
    assert main(["run", tiny, "--out", str(tmp_path / "o")]) == 0
    assert "overall: PASS" in capsys.readouterr().out
    assert (tmp_path / "o" / "report.json").exists()
    assert main(["transform", "--scenario", tiny, "--json", "--no-cache"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["experiments"][0]["name"] == "plancherel"


def test_transform_tolerance_failure_exit_code(tiny, capsys):
    assert main(["transform", "--scenario", tiny, "--tol", "1e-12"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_mr_check_override(tiny, capsys):
    assert main(["mr-check", "--scenario", tiny, "--count", "2", "--seed", "9", "--json"]) == 0
    obs = json.loads(capsys.readouterr().out)["experiments"][0]["observed"]
    assert obs["count"] == 2


def test_scatter_bad_times(capsys):
    assert main(["scatter", "--times", "5,4"]) == 2
    assert "scatter.times" in capsys.readouterr().err


def test_asympt_single_check(capsys):
    assert main(["asympt", "--check", "fresnel", "--json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    obs = rep["experiments"][0]["observed"]
    assert set(obs) == {"fresnel"} and obs["fresnel"]["c0_exact"]


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "kreinlab.cli", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("krein", "transform", "mr-check", "scatter", "asympt", "run"):
        assert cmd in res.stdout
