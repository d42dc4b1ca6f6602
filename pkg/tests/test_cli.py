import io
import json
import subprocess
import sys

import pytest

from symbreak.cli import SCHEMA_VERSION, run

DEMO = "demos/models/oscillator.toml"


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_validate_builtin():
    code, out, _ = call("validate", "--model", "oscillator", "--subtorus", "1,1")
    doc = json.loads(out)
    assert code == 0 and doc["ok"] and doc["schema"] == SCHEMA_VERSION


def test_input_errors_exit_one(tmp_path):
    assert call("census", "--model", "nope")[0] == 1
    assert call("census", "--model-file", str(tmp_path / "missing.toml"))[0] == 1
    assert call("census", "--model", "oscillator", "--resolution", "4")[0] == 1
    assert call("frobnicate")[0] == 1
    bad = tmp_path / "bad.toml"
    bad.write_text("[chart]\ndim = 3\n")
    code, _, err = call("validate", "--model-file", str(bad))
    assert code == 1 and "input error" in err


def test_failed_hypothesis_exits_one():
    code, _, err = call("census", "--model", "oscillator", "--subtorus", "1,0", "--eps", "1e-3")
    assert code == 1 and "velocity" in err


def test_find_re_schema():
    code, out, _ = call("find-re", "--model", "pendulum", "--seed-x", "1.5,0.3,0,0")
    doc = json.loads(out)
    assert code == 0
    assert doc.keys() >= {"schema", "command", "model", "group", "relative_equilibrium"}
    assert doc["relative_equilibrium"].keys() >= {"x", "xi", "mu", "residual", "epsilon"}


def test_decompose_schema():
    code, out, _ = call("decompose", "--model", "oscillator", "--subtorus", "1,1")
    doc = json.loads(out)
    assert code == 0 and doc["dims"] == dict(v_m=0, orbit=2, w=2, n_alpha=1)
    assert doc["nondegeneracy"]["nondegenerate"]


def test_census_files_and_verify_round_trip(tmp_path):
    code, _, _ = call("census", "--model", "oscillator", "--subtorus", "1,1", "--eps", "1e-3",
                      "--resolution", "32", "--output-dir", str(tmp_path))
    assert code == 0
    doc = json.loads((tmp_path / "census.json").read_text())
    assert doc.keys() >= {"schema", "command", "eps", "mode", "count", "ls_bound",
                          "morse_bound", "points", "mapped", "model", "chart"}
    assert doc["count"] == 2
    assert (tmp_path / "census_points.csv").read_text().startswith("k_1,value")
    assert (tmp_path / "reduced.csv").read_text().startswith("k_1,hbar")
    code, out, _ = call("verify", "--report", str(tmp_path / "census.json"), "--horizon", "20")
    ver = json.loads(out)
    assert code == 0 and ver["passed"] and len(ver["results"]) == 2


def test_deterministic_output_is_byte_identical(monkeypatch):
    argv = ("census", "--model", "oscillator-break", "--eps", "1e-3", "--resolution", "16")
    a = call(*argv, "--deterministic")[1]
    b = call(*argv, "--deterministic")[1]
    monkeypatch.setenv("SYMBREAK_THREADS", "4")
    c = call(*argv)[1]
    assert a == b == c
    assert json.loads(a)["count"] == 4


def test_bad_thread_count(monkeypatch):
    monkeypatch.setenv("SYMBREAK_THREADS", "many")
    assert call("census", "--model", "oscillator", "--subtorus", "1,1", "--eps", "1e-3")[0] == 1


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('model = "oscillator"\nsubtorus = "1,1"\neps = "1e-3"\nresolution = 16\n')
    code, out, _ = call("census", "--config", str(cfg))
    assert code == 0 and json.loads(out)["eps"] == 1e-3
    code, out, _ = call("census", "--config", str(cfg), "--eps", "2e-3")
    assert code == 0 and json.loads(out)["eps"] == 2e-3
    cfg.write_text('colour = "blue"\n')
    assert call("census", "--config", str(cfg))[0] == 1


def test_reduce_unperturbed_is_constant():
    code, out, _ = call("reduce", "--model", "oscillator", "--subtorus", "1,1", "--eps", "0",
                        "--resolution", "16")
    rows = [line.split(",") for line in out.splitlines()[1:]]
    vals = [float(r[1]) for r in rows]
    assert code == 0 and len(rows) == 16 and max(vals) - min(vals) <= 1e-12


def test_custom_model_census():
    code, out, _ = call("census", "--model-file", DEMO, "--subtorus", "1,1", "--eps", "1e-3",
                        "--seed-x", "1,1,0,0", "--seed-xi", "0.5,0.5", "--mu", "0.5,0.5",
                        "--resolution", "16")
    assert code == 0 and json.loads(out)["count"] == 2


def test_sweep(tmp_path):
    code, _, _ = call("sweep", "--model", "pendulum", "--eps", "0.05,0.1,0.2",
                      "--resolution", "32", "--output-dir", str(tmp_path))
    doc = json.loads((tmp_path / "sweep.json").read_text())
    assert code == 0 and [s["count"] for s in doc["steps"]] == [2, 2, 2]
    assert doc["largest_eps_reached"] == 0.2
    assert (tmp_path / "sweep.csv").read_text().splitlines()[0].startswith("eps,count")


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "symbreak.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "symbreak" in res.stdout
