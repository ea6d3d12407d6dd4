import json
import subprocess
import sys

import numpy as np
import pytest

from dshierarchy import cli
from dshierarchy.cli import EXIT_CERT, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from dshierarchy.diffpoly import DiffPoly
from dshierarchy.document import EquationDocument


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# -- derive ---------------------------------------------------------------------------

def test_derive_kdv(capsys):
    code, out, _ = run(capsys, "derive", "--algebra", "sl2", "--hierarchy", "kdv", "--times", "3")
    assert code == EXIT_OK
    assert out.strip() == "d/dt3 v = 3/2 v v' - 1/4 v'''"


def test_derive_mkdv_first_flow(capsys):
    code, out, _ = run(capsys, "derive", "--hierarchy", "mkdv", "--times", "1")
    assert code == EXIT_OK and out.strip() == "d/dt1 u = u'"


def test_derive_several_times_json(capsys, tmp_path):
    target = tmp_path / "eqs.json"
    code, _, _ = run(capsys, "derive", "--algebra", "sl3", "--times", "1,2", "--format", "json", "-o", str(target))
    assert code == EXIT_OK
    docs = json.loads(target.read_text())
    assert [d["metadata"]["m"] for d in docs] == [1, 2]
    back = EquationDocument.from_dict(docs[1])
    assert back.metadata.algebra == "sl3"


def test_derive_latex(capsys):
    code, out, _ = run(capsys, "derive", "--times", "3", "--format", "latex")
    assert code == EXIT_OK and out.startswith("\\partial_{t_{3}} v =")


def test_derive_pushforward_method(capsys):
    code, out, _ = run(capsys, "derive", "--times", "3", "--method", "miura_pushforward")
    assert code == EXIT_OK and out.strip() == "d/dt3 v = 3/2 v v' - 1/4 v'''"


def test_derive_generalized(capsys):
    code, out, _ = run(capsys, "derive", "--hierarchy", "generalized", "--heisenberg", "homogeneous",
                       "--times", "2")
    assert code == EXIT_OK
    assert out.splitlines() == ["d/dt2 q = -q^2 r + 1/2 q''", "d/dt2 r = q r^2 - 1/2 r''"]


@pytest.mark.parametrize("argv", [
    ["derive", "--times", "2"],
    ["derive", "--times", "x"],
    ["derive", "--algebra", "so5", "--times", "1"],
    ["derive", "--algebra", "sl1", "--times", "1"],
    ["derive", "--hierarchy", "generalized", "--heisenberg", "nope", "--times", "1"],
    ["derive", "--hierarchy", "toda", "--times", "1"],
    ["derive"],
    ["nonsense"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_USAGE
    assert err


def test_bad_truncation_buffer(capsys, monkeypatch):
    monkeypatch.setenv("DS_TRUNC_BUFFER", "lots")
    code, _, err = run(capsys, "derive", "--times", "3")
    assert code == EXIT_USAGE and "DS_TRUNC_BUFFER" in err


# -- verify -----------------------------------------------------------------------

def test_verify_commute_and_miura(capsys):
    code, out, _ = run(capsys, "verify", "--check", "commute,miura", "--pairs", "3:5", "--times", "3")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "commute sl2 kdv [D3, D5]: exact-zero"
    assert lines[-1] == "all certificates passed"


def test_verify_everything_sl3(capsys):
    code, out, _ = run(capsys, "verify", "--algebra", "sl3", "--hierarchy", "mkdv",
                       "--check", "zero-curvature,homogeneity,commute", "--pairs", "1:2,2:4")
    assert code == EXIT_OK
    assert "FAIL" not in out


def test_verify_nonsmooth_homogeneity_not_applicable(capsys):
    code, out, _ = run(capsys, "verify", "--hierarchy", "generalized", "--heisenberg", "nonsmooth-sl2",
                       "--check", "homogeneity,zero-curvature,commute", "--times", "0,1", "--pairs", "0:1")
    assert code == EXIT_OK
    assert "not applicable" in out


def test_verify_reports_failed_certificate(capsys, monkeypatch):
    monkeypatch.setattr(cli, "flow_commutator", lambda f, g: {"v": DiffPoly.jet("v", 2)})
    code, out, _ = run(capsys, "verify", "--check", "commute", "--pairs", "3:5")
    assert code == EXIT_CERT
    assert "FAIL" in out and "v''" in out


def test_verify_needs_pairs(capsys):
    code, _, _ = run(capsys, "verify", "--check", "commute")
    assert code == EXIT_USAGE
    code, _, _ = run(capsys, "verify", "--check", "vibes")
    assert code == EXIT_USAGE


# -- integrate ----------------------------------------------------------------------

def test_integrate_zero_writes_csv(capsys, tmp_path):
    target = tmp_path / "zero.csv"
    code, out, _ = run(capsys, "integrate", "--equation", "kdv:3", "--initial", "zero", "--grid", "32",
                       "--length", "10", "--tmax", "0.01", "--output", str(target))
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["files"] == [str(target), str(target.with_suffix(".json"))]
    data = np.loadtxt(target, delimiter=",", skiprows=1)
    assert data.shape[1] == 3 and not data[:, 2].any()


def test_integrate_short_soliton(capsys):
    code, out, _ = run(capsys, "integrate", "--equation", "kdv:3", "--grid", "256", "--length", "40",
                       "--tmax", "1")
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["soliton"]["c"] == pytest.approx(1.0)
    assert report["shape_error"] < 1e-6


def test_integrate_miura(capsys):
    code, out, _ = run(capsys, "integrate", "--equation", "mkdv:3", "--initial", "cos:0.5", "--grid", "128",
                       "--length", "50", "--tmax", "0.2", "--miura")
    assert code == EXIT_OK
    assert json.loads(out)["miura_residual"] < 1e-8


def test_integrate_from_file(capsys, tmp_path):
    src = tmp_path / "init.csv"
    np.savetxt(src, np.zeros((16, 2)), delimiter=",")
    code, _, _ = run(capsys, "integrate", "--algebra", "sl3", "--equation", "kdv:1", "--initial", f"file:{src}",
                     "--grid", "16", "--length", "5", "--tmax", "0.01")
    assert code == EXIT_OK
    code, _, _ = run(capsys, "integrate", "--equation", "kdv:3", "--initial", f"file:{src}",
                     "--grid", "16", "--length", "5", "--tmax", "0.01")
    assert code == EXIT_USAGE


@pytest.mark.parametrize("argv", [
    ["--equation", "kdv:3", "--dt", "1.0"],
    ["--equation", "kdv3"],
    ["--equation", "mkdv:3", "--initial", "soliton"],
    ["--equation", "kdv:3", "--initial", "soliton:2"],
    ["--equation", "kdv:3", "--initial", "sawtooth"],
    ["--equation", "kdv:3", "--grid", "100", "--initial", "zero"],
    ["--equation", "kdv:3", "--initial", "zero", "--miura"],
])
def test_integrate_usage_errors(capsys, argv):
    code, _, _ = run(capsys, "integrate", *argv)
    assert code == EXIT_USAGE


def test_integrate_blowup_exit_code(capsys):
    code, _, err = run(capsys, "integrate", "--equation", "kdv:3", "--initial", "cos:1e5", "--grid", "32",
                       "--length", "10", "--tmax", "1")
    assert code == EXIT_NUMERIC
    assert "blew up" in err


# -- misc ---------------------------------------------------------------------------

def test_catalog(capsys):
    code, out, _ = run(capsys, "catalog")
    assert code == EXIT_OK
    assert "nonsmooth-sl2" in out and "homogeneous" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dshierarchy", "derive", "--times", "3"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "d/dt3 v = 3/2 v v' - 1/4 v'''"
