import csv
import io
import json
import math
import subprocess
import sys

import pytest

from mobedge import cli
from mobedge.checks import CheckResult
from mobedge.errors import ConvergenceError


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def rows_of(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(body))


def test_reduce_peaky():
    code, out, _ = call("reduce", "model=peaky", "K=1", "lambda=5")
    assert code == 0
    got = json.loads(out)
    assert got["lambda_eff"] == pytest.approx(5 / 9)
    assert got["tau"] == pytest.approx(2 / 3)
    assert got["shift"] == pytest.approx(5 / 3)
    assert got["critical_energies"] == pytest.approx([3.0])


@pytest.mark.parametrize("argv", [
    ("reduce", "model=mosaic", "kappa=2"),
    ("reduce", "model=nope"),
    ("lyapunov", "alpha=0.3"),
    ("lyapunov", "alpha=banana"),
    ("lyapunov", "colour=blue"),
    ("lyapunov", "steps=many"),
    ("lyapunov", "notakeyvalue"),
    ("lyapunov", "format=xml"),
    ("lyapunov", "steps=10", "E=0"),
    ("frobnicate",),
])
def test_bad_config_exits_2(argv):
    code, out, err = call(*argv)
    assert code == 2
    assert out == ""


def test_numerical_failure_exits_3(monkeypatch):
    def boom(cfg):
        raise ConvergenceError("did not converge")
    monkeypatch.setitem(cli.COMMANDS, "reduce", boom)
    code, _, err = call("reduce")
    assert code == 3 and "numerical failure" in err


def test_verify_subset_and_failure(monkeypatch):
    code, out, _ = call("verify", "checks=continued_fraction,peaky_reduction,zero_energy_conjugacy")
    assert code == 0
    rep = json.loads(out)
    assert rep["status"] == "pass"
    assert [c["name"] for c in rep["checks"]] == ["continued_fraction", "peaky_reduction", "zero_energy_conjugacy"]
    assert all(c["status"] == "pass" for c in rep["checks"])

    def bad(quick=False):
        return CheckResult("always_fails", "fail", 1.0, 0.0, "<", 0.0)
    monkeypatch.setitem(cli.CHECKS, "always_fails", bad)
    code, out, _ = call("verify", "checks=continued_fraction,always_fails")
    assert code == 1
    assert json.loads(out)["status"] == "fail"
    assert call("verify", "checks=no_such_check")[0] == 2


def test_lyapunov_csv_header_and_rerun():
    argv = ("lyapunov", "model=amo", "lambda=2", "E=0.1,0.5", "steps=5000", "seed=3", "threads=1")
    code, first, _ = call(*argv)
    assert code == 0
    lines = first.splitlines()
    assert lines[0].startswith("# mobedge ")
    assert lines[1].startswith("# config ")
    config = json.loads(lines[1][len("# config "):])
    assert config["lam"] == 2.0 and config["seed"] == 3 and config["subcommand"] == "lyapunov"
    assert lines[2] == "# seed=3 threads=1"
    rows = rows_of(first)
    assert [float(r["E"]) for r in rows] == [0.1, 0.5]
    for r in rows:
        assert float(r["L_numeric"]) == pytest.approx(math.log(2), abs=0.05)
        assert float(r["L_formula"]) == pytest.approx(math.log(2))
    assert call(*argv)[1] == first


def test_threads_give_same_values():
    base = ("lyapunov", "model=gaa", "lambda=0.5", "tau=0.5", "E=0.2,1.0", "steps=5000")
    one = rows_of(call(*base, "threads=1")[1])
    two = rows_of(call(*base, "threads=2")[1])
    assert one == two


def test_settings_file(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("model=mosaic\nkappa=3\nlambda=2\n")
    code, out, _ = call("lyapunov", f"@{f}", "E=1.5", "steps=2000")
    assert code == 0
    cfg = json.loads(out.splitlines()[1][len("# config "):])
    assert cfg["model"] == "mosaic" and cfg["kappa"] == 3


def test_alpha_selectors():
    assert cli.resolve_alpha("golden") == pytest.approx((math.sqrt(5) - 1) / 2, rel=1e-16)
    assert cli.resolve_alpha("cf:2") == pytest.approx(math.sqrt(2) - 1, rel=1e-15)
    assert 0 < cli.resolve_alpha("0.41421356237309503") < 1


def test_spectrum_output(tmp_path):
    out = tmp_path / "spec.csv"
    code, text, _ = call("spectrum", "model=mosaic", "kappa=2", "lambda=2", "N=32", "thetas=2", f"out={out}")
    assert code == 0 and text == ""
    content = out.read_text()
    assert content.startswith("# mobedge ")
    rows = rows_of(content)
    assert len(rows) == 64
    assert rows[0]["model_id"] == "mosaic(lambda=2,kappa=2)"
    evs = [float(r["eigenvalue"]) for r in rows[:32]]
    assert evs == sorted(evs)
    assert all(1 / 32 <= float(r["ipr"]) <= 1 for r in rows)


def test_json_format():
    code, out, _ = call("lyapunov", "E=0.3", "steps=2000", "format=json")
    assert code == 0
    data = json.loads(out)
    assert data["config"]["format"] == "json" and len(data["rows"]) == 1


def test_phase_diagram_small(tmp_path):
    out = tmp_path / "pd.csv"
    code, _, _ = call("phase-diagram", "model=mosaic", "kappa=2", "lambda=2", "alpha=golden",
                      "E=0:0.8:0.01", "N=512", "thetas=8", "steps=20000", f"out={out}")
    assert code == 0
    text = out.read_text()
    rows = rows_of(text)
    assert len(rows) == 81
    assert list(rows[0]) == ["lambda", "E", "class", "L_numeric", "L_formula", "accel", "in_spectrum", "ipr_median"]
    crossings = [line for line in text.splitlines() if line.startswith("# crossing")]
    assert len(crossings) == 1
    E = float(crossings[0].split("E=")[1].split()[0])
    assert E == pytest.approx(0.5, abs=0.05)
    side = json.loads((tmp_path / "pd.json").read_text())
    assert side["crossings"]["2.0"][0]["best"] == pytest.approx(0.5, abs=0.05)
    assert side["predicted"]["2.0"] == pytest.approx([-0.5, 0.5])


def test_detect_me_json():
    code, out, _ = call("detect-me", "model=mosaic", "kappa=2", "lambda=2", "E=0:0.8:0.01",
                        "N=512", "thetas=8", "steps=20000", "format=json")
    assert code == 0
    data = json.loads(out)
    assert len(data["crossings"]) == 1
    assert data["crossings"][0]["best"] == pytest.approx(0.5, abs=0.05)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mobedge", "reduce", "model=gaa", "lambda=0.5", "tau=0.5"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["critical_energies"] == pytest.approx([2.0])
    proc = subprocess.run([sys.executable, "-m", "mobedge", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "mobedge" in proc.stdout
