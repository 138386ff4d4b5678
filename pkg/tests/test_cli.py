import json
import shutil
import subprocess

import pytest

from varharm.cli import ERROR_EXIT, main
from varharm.grid import read_csv


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_list(capsys):
    code, out, _ = run(capsys, "list")
    assert code == 0
    assert "theorem21" in json.loads(out)


def test_verify_pass_and_outputs(capsys, tmp_path):
    code, out, err = run(capsys, "verify", "ineqmax", "--out", str(tmp_path / "r.json"), "--csv", str(tmp_path))
    assert code == 0
    assert json.loads(out)["verdict"] == "pass"
    assert "ineqmax: pass" in err
    assert (tmp_path / "ineqmax.csv").exists()
    assert json.loads((tmp_path / "r.json").read_text())["target"] == "ineqmax"


def test_verify_with_config_file(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"target": "lemma12-rh", "N": 256}))
    code, out, _ = run(capsys, "verify", "lemma12-rh", "--config", str(cfg))
    assert code == 0
    assert json.loads(out)["config"]["N"] == 256


def test_verify_planar_flag(capsys):
    code, out, _ = run(capsys, "verify", "remark22-exponents", "--2d", "--N", "32")
    assert code == 0
    assert json.loads(out)["config"]["n"] == 2


def test_unregistered_target(capsys):
    code, _, err = run(capsys, "verify", "nope")
    assert code == ERROR_EXIT
    assert "unregistered" in err


@pytest.mark.parametrize("op", ["hl", "centered", "frac", "discrete", "grand"])
def test_maximal(capsys, tmp_path, op):
    path = tmp_path / "m.csv"
    code, out, _ = run(capsys, "maximal", "--op", op, "--N", "256", "--out", str(path))
    assert code == 0
    data = json.loads(out)
    assert data["output"]["sup"] > 0
    assert read_csv(path).grid.N == 256


@pytest.mark.parametrize("check", ["a1", "ap", "apq", "rh"])
def test_weights(capsys, check):
    code, out, _ = run(capsys, "weights", "--check", check, "--N", "256", "--p", "1.5", "--q", "3")
    assert code == 0
    assert json.loads(out)["constant"] >= 1 - 1e-6


def test_weights_from_csv(capsys, tmp_path):
    path = tmp_path / "g.csv"
    run(capsys, "maximal", "--N", "128", "--out", str(path))
    code, out, _ = run(capsys, "weights", "--N", "128", "--weight", str(path))
    assert code == 0


def test_rdf(capsys):
    code, out, _ = run(capsys, "rdf", "--N", "256", "--trials", "4")
    assert code == 0
    assert json.loads(out)["flagged"] is False


def test_atom_and_potential(capsys, tmp_path):
    path = tmp_path / "a.csv"
    code, out, _ = run(capsys, "atom", "--degree", "2", "--radius", "0.75", "--out", str(path))
    assert code == 0 and json.loads(out)["passed"]
    code, out, _ = run(capsys, "potential", "--function", str(path), "--m", "2", "--alpha", "0")
    assert code == 0
    assert json.loads(out)["operator"]["m"] == 2


def test_farfield(capsys):
    code, out, _ = run(capsys, "farfield", "--N", "2048", "--radius", "0.0625")
    assert code == 0
    assert json.loads(out)["slope"] == pytest.approx(-1.5, abs=0.15)


def test_weaktype(capsys):
    code, out, _ = run(capsys, "weaktype", "--N", "256", "--m", "2")
    assert code == 0
    assert json.loads(out)["c_fit"] > 0


def test_bad_input_is_reported(capsys):
    code, _, err = run(capsys, "potential", "--function", "/no/such/file.csv")
    assert code == ERROR_EXIT
    assert err.startswith("varharm: error")


@pytest.mark.skipif(shutil.which("varharm") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["varharm", "list"], capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert "ineqmax" in json.loads(res.stdout)
