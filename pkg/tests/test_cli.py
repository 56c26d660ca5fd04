import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gplhy import __version__
from gplhy.bounds import upper_bound
from gplhy.cli import main
from gplhy.io import read_snapshot, write_snapshot

GOLDEN = json.loads((Path(__file__).parent / "golden" / "minimize_report_keys.json").read_text())
SMALL = ["--nx", "32", "--ny", "32", "--nz", "48"]
LAM5 = 2 * upper_bound(5.0)[0]


@pytest.fixture(scope="module")
def supercritical(tmp_path_factory):
    d = tmp_path_factory.mktemp("sup")
    fld, rep = d / "x.fld", d / "x.json"
    code = main(["minimize", "--b", "5", "--lambda", str(LAM5), *SMALL, "--out", str(fld), "--report", str(rep)])
    return code, fld, json.loads(rep.read_text())


# ------------------------------------------------------------------ bounds


def test_bounds_json(capsys):
    assert main(["bounds", "--b", "2"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["lower"] == pytest.approx(29.8037, abs=1e-4)
    assert d["upper_scaled"] == pytest.approx(d["upper_numeric"])
    assert d["reference_upper_constant"] == 84.437


def test_bounds_b5_csv(capsys):
    assert main(["bounds", "--b", "5", "--format", "csv"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 1
    assert float(rows[0]["lower"]) == pytest.approx(0.93136, abs=1e-5)
    assert float(rows[0]["upper_numeric"]) >= float(rows[0]["lower"])


def test_bounds_domain(capsys):
    assert main(["bounds", "--b", "0.9"]) == 1
    assert "b > 1" in capsys.readouterr().err


def test_bounds_out_file(tmp_path):
    out = tmp_path / "b.json"
    assert main(["bounds", "--b", "2", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["b"] == 2.0


# ------------------------------------------------------------------ argument errors


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["minimize", "--b", "2"],
        ["minimize", "--b", "2", "--lambda", "-3"],
        ["minimize", "--b", "2", "--lambda", "10", "--nx", "7"],
        ["minimize", "--b", "2", "--lambda", "10", "--tol", "0"],
        ["minimize", "--b", "2", "--lambda", "10", "--max-iter", "0"],
        ["minimize", "--b", "2", "--lambda", "10", "--init", "bogus"],
        ["minimize", "--b", "2", "--lambda", "10", "--box", "1,2"],
        ["sweep", "--b", "2", "--lambda-min", "5", "--lambda-max", "4"],
        ["sweep", "--b", "2", "--lambda-min", "5", "--lambda-max", "9", "--steps", "1"],
        ["critical-mass", "--b", "1.0"],
        ["bounds", "--b", "2", "--format", "xml"],
    ],
)
def test_argument_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


# ------------------------------------------------------------------ minimize


def test_minimize_supercritical(supercritical):
    code, fld, rep = supercritical
    assert code == 0
    assert rep["converged"] is True
    assert rep["energy"]["total"] < 0 and rep["mu"] < 0
    snap = read_snapshot(fld)
    assert snap.b == 5.0 and snap.lam == pytest.approx(LAM5)
    assert snap.field.mass() == pytest.approx(LAM5, rel=1e-10)


def test_report_key_set_matches_golden(supercritical):
    _, _, rep = supercritical
    assert list(rep) == GOLDEN["top_level"]
    for block in ("grid", "energy", "virial", "bounds"):
        assert list(rep[block]) == GOLDEN[block]
    assert set(GOLDEN["decay_required"]) <= set(rep["decay"])
    assert rep["version"] == __version__


def test_minimize_subcritical_flags_no_binding(tmp_path):
    rep = tmp_path / "r.json"
    code = main(["minimize", "--b", "2", "--lambda", "1", "--nx", "16", "--ny", "16", "--nz", "16", "--report", str(rep)])
    d = json.loads(rep.read_text())
    assert code == 0
    assert d["flag"] == "no binding detected"
    assert d["energy"]["total"] >= -1e-5
    assert set(GOLDEN["top_level"]) <= set(d)


def test_minimize_non_convergence_exit_2(tmp_path):
    rep = tmp_path / "r.json"
    code = main(["minimize", "--b", "5", "--lambda", str(LAM5), *SMALL, "--max-iter", "2", "--report", str(rep)])
    assert code == 2
    d = json.loads(rep.read_text())
    assert d["converged"] is False and d["iterations"] == 2


def test_minimize_unwritable_exit_3(capsys):
    code = main(["minimize", "--b", "5", "--lambda", "100", *SMALL, "--out", "/nonexistent-dir/x.fld"])
    assert code == 3
    assert "IO error" in capsys.readouterr().err


def test_minimize_init_file(supercritical, tmp_path):
    _, fld, _ = supercritical
    rep = tmp_path / "r.json"
    code = main(["minimize", "--b", "5", "--lambda", str(LAM5), *SMALL, "--init", "file", "--state", str(fld),
                 "--report", str(rep)])
    d = json.loads(rep.read_text())
    assert code == 0 and d["iterations"] <= 5


def test_minimize_init_file_bad_snapshot(tmp_path, capsys):
    bad = tmp_path / "bad.fld"
    bad.write_bytes(b"garbage" * 20)
    code = main(["minimize", "--b", "5", "--lambda", "100", *SMALL, "--init", "file", "--state", str(bad)])
    assert code == 3


# ------------------------------------------------------------------ check


def test_check_reports_flags(supercritical, tmp_path):
    _, fld, _ = supercritical
    rep = tmp_path / "c.json"
    code = main(["check", "--state", str(fld), "--report", str(rep)])
    d = json.loads(rep.read_text())
    assert set(d["flags"]) == {"mass_matches", "negative_energy", "mu_negative", "virial", "yukawa", "decay"}
    assert d["flags"]["mass_matches"] and d["flags"]["negative_energy"] and d["flags"]["mu_negative"]
    assert code == (0 if d["passed"] else 2)


def test_check_fails_on_spread_state(tmp_path):
    from gplhy.grid import GridSpec, sample

    fld = tmp_path / "flat.fld"
    psi = sample(GridSpec.cube(16, 20.0), lambda x, y, z: 0.1 + 0 * x)
    write_snapshot(fld, psi, 2.0, psi.mass())
    assert main(["check", "--state", str(fld)]) == 2


@pytest.mark.parametrize("content", [b"", b"GPLHYFLD" + b"\0" * 10, b"XXXXXXXX" + b"\0" * 100])
def test_check_bad_snapshot_exit_3(tmp_path, content, capsys):
    fld = tmp_path / "bad.fld"
    fld.write_bytes(content)
    assert main(["check", "--state", str(fld)]) == 3
    assert "format error" in capsys.readouterr().err


def test_check_missing_file_exit_3(tmp_path):
    assert main(["check", "--state", str(tmp_path / "missing.fld")]) == 3


def test_check_wrong_version_exit_3(supercritical, tmp_path, capsys):
    _, fld, _ = supercritical
    raw = bytearray(fld.read_bytes())
    raw[8] = 9
    bad = tmp_path / "v9.fld"
    bad.write_bytes(bytes(raw))
    assert main(["check", "--state", str(bad)]) == 3
    assert "version" in capsys.readouterr().err


# ------------------------------------------------------------------ sweep and critical mass


def test_sweep_csv(tmp_path):
    out = tmp_path / "s.csv"
    rep = tmp_path / "s.json"
    code = main(["sweep", "--b", "2", "--lambda-min", "1", "--lambda-max", "3", "--steps", "3",
                 "--nx", "16", "--ny", "16", "--nz", "16", "--out", str(out), "--report", str(rep)])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["lambda", "E", "mu", "converged"]
    assert [float(r["lambda"]) for r in rows] == [1.0, 2.0, 3.0]
    assert json.loads(rep.read_text())["checks"]["subadditivity_pairs_checked"] == 2


def test_critical_mass_small(tmp_path):
    out = tmp_path / "cm.csv"
    rep = tmp_path / "cm.json"
    code = main(["critical-mass", "--b", "5", "--rel-tol", "0.3", *SMALL, "--out", str(out), "--report", str(rep)])
    assert code == 0
    d = json.loads(rep.read_text())
    lo, hi = d["bracket"]
    assert lo <= d["lambda_c_estimate"] <= hi and hi / lo - 1 <= 0.3
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["lambda", "E_min", "bound"]
    assert len(rows) == len(d["evaluations"])


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "gplhy.cli", "bounds", "--b", "0.5"], capture_output=True, text=True)
    assert r.returncode == 1
    r = subprocess.run([sys.executable, "-m", "gplhy.cli", "bounds", "--b", "3"], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["b"] == 3.0
