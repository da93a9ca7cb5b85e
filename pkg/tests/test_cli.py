import json
import shutil
import subprocess

import pytest

from dimgap import cli, thermo
from dimgap.bernoulli import ProbVector


def run_json(capsys, *argv):
    rc = cli.run(list(argv))
    out = capsys.readouterr()
    assert rc == 0, out.err
    return json.loads(out.out)


def test_dim_json(capsys):
    doc = run_json(capsys, "dim", "--pvec", "[0.5, 0.5]", "--tol", "1e-9")
    assert doc["command"] == "dim"
    assert {"entropy", "lyapunov", "dim", "err"} <= set(doc["result"])
    assert doc["result"]["dim"] == pytest.approx(0.5149596825294607, abs=1e-9)
    assert "meta" in doc and doc["version"] == cli.__version__


def test_exit_codes(capsys):
    assert cli.run(["dim", "--pvec", "[0.5, 0.6]"]) == 1
    assert "weights sum" in capsys.readouterr().err
    assert cli.run(["no-such-command"]) == 2
    assert cli.run(["dim", "--tol", "abc"]) == 2
    assert cli.run(["pressure", "--b", "0.5", "--full-alphabet"]) == 1  # divergent
    capsys.readouterr()


def test_beta_curve_csv(capsys):
    rc = cli.run(["beta-curve", "--pvec", "[0.5,0.5]", "--t-grid", "0:1:0.5", "--format", "csv", "--no-meta"])
    lines = capsys.readouterr().out.splitlines()
    assert rc == 0
    assert lines[0].startswith("# dimgap")
    assert lines[1].startswith("# config ")
    assert lines[2] == "t,beta,beta_prime,beta_second,err"
    rows = [[float(v) for v in ln.split(",")] for ln in lines[3:]]
    assert [r[0] for r in rows] == [0.0, 0.5, 1.0]
    assert rows[2][1] == pytest.approx(0.0, abs=1e-8)


def test_parse_t_grid():
    assert list(cli.parse_t_grid("0:1:0.25")) == pytest.approx([0, 0.25, 0.5, 0.75, 1])
    assert list(cli.parse_t_grid("0.1,0.2")) == [0.1, 0.2]


def test_check_map(capsys):
    doc = run_json(capsys, "check-map", "--no-meta")
    r = doc["result"]
    assert r["renyi"]["kappa_R"] == pytest.approx(16.0, abs=1e-6)
    assert r["expansion"]["passes"] and r["decay"]["passes"]


def test_pressure_and_variance(capsys):
    doc = run_json(capsys, "pressure", "--pvec", "[0.5,0.5]", "--b", "0.3", "--t", "0.5", "--no-meta")
    spec = thermo.PotentialSpec(0.3, 0.5, ProbVector([0.5, 0.5]))
    assert doc["result"]["value"] == pytest.approx(thermo.pressure(spec).value, abs=1e-12)
    doc = run_json(capsys, "variance", "--pvec", "[0.5,0.5]", "--t", "0.2", "--no-meta")
    res = doc["result"]
    assert res["beta_second"] == pytest.approx(0.0340811062, abs=1e-7)


def test_config_round_trip(capsys, tmp_path):
    first = cli.run(["dim", "--pvec", "[0.7,0.3]", "--no-meta"])
    out1 = capsys.readouterr().out
    assert first == 0
    cfg = tmp_path / "cfg.json"
    cfg.write_text(out1)
    assert cli.run(["--config", str(cfg)]) == 0
    out2 = capsys.readouterr().out
    assert out1 == out2


def test_deterministic_without_meta(capsys):
    argv = ["optimize", "--support", "2", "--restarts", "2", "--no-meta"]
    cli.run(argv)
    a = capsys.readouterr().out
    cli.run(argv)
    b = capsys.readouterr().out
    assert a == b


def test_threads_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("DIMGAP_THREADS", "3")
    doc = run_json(capsys, "dim", "--pvec", "[0.5,0.5]")
    assert doc["config"]["threads"] == 3
    doc = run_json(capsys, "dim", "--pvec", "[0.5,0.5]", "--threads", "1")
    assert doc["config"]["threads"] == 1


def test_output_file(capsys, tmp_path):
    path = tmp_path / "out.json"
    assert cli.run(["dim", "--pvec", "[0.5,0.5]", "--output", str(path)]) == 0
    assert json.loads(path.read_text())["result"]["dim"] > 0.5


@pytest.mark.skipif(shutil.which("dimgap") is None, reason="console script not installed")
def test_console_script():
    p = subprocess.run(["dimgap", "--version"], capture_output=True, text=True)
    assert p.returncode == 0 and cli.__version__ in p.stdout
