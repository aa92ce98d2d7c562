import json
import subprocess
import sys

import numpy as np
import pytest

from sectorsum.cli import DEFAULT_CONFIG, load_config, main
from sectorsum.exceptions import ConfigurationError

SMALL = {"schema": 1,
         "params": {"omega": np.pi / 2, "mu": 2.0, "k": 0.5, "rho": 1.0},
         "grids": {"theta": {"n": 24}, "t": {"n": 32, "t_max": 20.0}},
         "contour": {"n_nodes": 48},
         "rho0": {"power_steps": 1}}


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(SMALL))
    return path


def test_roots_json(capsys):
    assert main(["roots", "--count", "5", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["roots"]) == 5
    assert abs(out["tau"] - 4.21239) < 1e-4


def test_roots_table(capsys):
    assert main(["roots", "--count", "3"]) == 0
    assert "tau = 4.2123922" in capsys.readouterr().out


def test_check_ok(capsys):
    assert main(["check", "--omega", "3.1415926", "--mu", "1"]) == 0
    assert capsys.readouterr().out.startswith("OK: ωμ = 3.1416 < τ = 4.2124")


def test_check_fail(capsys):
    assert main(["check", "--omega", "6.2832", "--mu", "1"]) == 2
    assert capsys.readouterr().out.startswith("FAIL: ωμ ≥ τ")


def test_unknown_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["roots", "--bogus"])
    assert exc.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_command():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_config_unknown_key(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"params": {"omegaa": 1.0}}))
    assert main(["solve", "--config", str(path), "--rhs", "builtin:uniform"]) == 1
    assert "omegaa" in capsys.readouterr().err


def test_config_merge(small_config):
    cfg = load_config(small_config)
    assert cfg["grids"]["theta"]["clustering"] == DEFAULT_CONFIG["grids"]["theta"]["clustering"]
    assert cfg["grids"]["theta"]["n"] == 24
    assert cfg["params"]["tolerances"]["neumann_tol"] == 1e-8


def test_config_schema(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"schema": 7}))
    with pytest.raises(ConfigurationError):
        load_config(path)


def test_resolve_theta_round_trip(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["resolve-theta", "--lambda=-5+2j", "--out", str(out)]) == 0
    assert out.read_text().startswith("theta,psi1_re,psi1_im,psi2_re,psi2_im\n0.0,")
    assert main(["resolve-theta", "--lambda=-5+2j", "--rhs", "builtin:nothing"]) == 1


def test_resolve_t_domain(capsys):
    assert main(["resolve-t", "--lambda=-1", "--mu", "1"]) == 1
    assert main(["resolve-t", "--lambda", "20+1j", "--mu", "1"]) == 0


def test_oracle_compare(capsys):
    assert main(["oracle-compare", "--lambda=-10"]) == 0
    assert "relative X-norm difference" in capsys.readouterr().out


def test_solve_outputs(tmp_path, small_config):
    u, rep, V = tmp_path / "u.csv", tmp_path / "rep.json", tmp_path / "V.csv"
    code = main(["solve", "--config", str(small_config), "--rhs", "builtin:bilinear",
                 "--out", str(u), "--report", str(rep), "--field-out", str(V), "--workers", "1"])
    assert code == 0
    report = json.loads(rep.read_text())
    assert report["schema"] == 1 and report["spectral"]["gate"]
    assert report["iterations"] == len(report["corrections"])
    assert set(report["traces"]) == {"u_edge", "dudn_edge", "u_arc", "V0_norm", "u_max"}
    assert u.read_text().splitlines()[0] == "r,theta,x,y,u,masked"
    # a solved field is a valid right-hand side for invert-sum
    assert main(["invert-sum", "--config", str(small_config), "--rhs", str(V),
                 "--report", str(tmp_path / "inv.json")]) == 0


def test_solve_gate_failure(tmp_path):
    cfg = dict(SMALL, params={"omega": np.pi, "mu": 2.0})
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert main(["solve", "--config", str(path), "--rhs", "builtin:uniform"]) == 2


def test_solve_divergence(tmp_path):
    cfg = dict(SMALL, params={"omega": np.pi / 2, "mu": 2.0, "k": 1.0, "rho": 30.0})
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert main(["solve", "--config", str(path), "--rhs", "builtin:gaussian"]) == 2


def test_reports_deterministic(tmp_path, small_config, monkeypatch):
    outs = []
    for workers in ("1", "3"):
        monkeypatch.setenv("SECTORSUM_WORKERS", workers)
        path = tmp_path / f"rep{workers}.json"
        assert main(["invert-sum", "--config", str(small_config), "--rhs", "builtin:gaussian",
                     "--report", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_verify_mihlin(tmp_path, capsys):
    path = tmp_path / "v.json"
    assert main(["verify", "--suite", "mihlin", "--report", str(path)]) == 0
    assert capsys.readouterr().out.strip() == "PASS"
    assert json.loads(path.read_text())["passed"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sectorsum", "check", "--omega", "1",
                           "--mu", "1"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("OK")
