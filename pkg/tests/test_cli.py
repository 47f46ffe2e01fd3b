import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from emsphere.cli import PROFILE_COLUMNS, RECORD_FIELDS, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def strip_time(obj):
    if isinstance(obj, dict):
        return {k: strip_time(v) for k, v in obj.items() if k != "wall_time_ms"}
    if isinstance(obj, list):
        return [strip_time(v) for v in obj]
    return obj


def test_solve_record_layout(capsys, tmp_path):
    path = tmp_path / "rec.json"
    code, rec = run(capsys, "solve", "--sigma", "quad:0.5", "--grid", "32", "--json", str(path))
    assert code == 0
    assert tuple(rec) == RECORD_FIELDS
    assert rec["outcome"] == "converged"
    assert rec["config"]["sigma_descriptor"] == "quad:0.5"
    assert json.loads(path.read_text()) == rec


def test_direct_round(capsys):
    code, rec = run(capsys, "solve", "--sigma", "zero", "--method", "direct")
    assert code == 0
    assert rec["residual_sup"] <= 1e-8
    assert rec["I_tilde"] is None or np.isfinite(rec["I_tilde"])


def test_profile_csv(capsys, tmp_path):
    path = tmp_path / "p.csv"
    code, _ = run(capsys, "solve", "--sigma", "quad:0.5", "--grid", "24", "--csv", str(path))
    assert code == 0
    rows = list(csv.reader(path.open()))
    assert tuple(rows[0]) == PROFILE_COLUMNS
    assert len(rows) == 26
    mu = np.array([float(r[0]) for r in rows[1:]])
    psi = np.array([float(r[1]) for r in rows[1:]])
    assert np.max(np.abs(psi - (1 - np.exp(0.5 * (mu**2 - 1))) / 0.5)) <= 1e-8


def test_obstructed_exit(capsys):
    code, rec = run(capsys, "solve", "--sigma", "lin:-1")
    assert code == 2
    assert rec["outcome"] == "stalled"
    assert rec["obstruction"] == pytest.approx(2 / np.e, abs=1e-10)
    assert rec["futaki_im"] == pytest.approx(4 * np.pi / np.e, abs=1e-6)


def test_direct_obstructed_exit(capsys):
    code, rec = run(capsys, "solve", "--sigma", "lin:-1", "--method", "direct")
    assert code == 2
    assert rec["outcome"] == "no-solution-obstruction"


@pytest.mark.parametrize("argv", [
    ["solve", "--sigma", "neglog:0.5"],
    ["solve", "--sigma", "bogus"],
    ["solve", "--sigma", "zero", "--grid", "4"],
    ["solve"],
    ["nonsense"],
])
def test_bad_input_exit(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 3


def test_obstruction_command(capsys):
    code, rec = run(capsys, "obstruction", "--sigma", "neglog:2")
    assert code == 2
    assert rec["obstruction"] == pytest.approx(2 / 3, abs=1e-10)
    code, rec = run(capsys, "obstruction", "--sigma", "quad:1.0")
    assert code == 0


def test_futaki_command(capsys):
    code, rec = run(capsys, "futaki", "--sigma", "quad:0.5", "--samples", "3")
    assert code == 0
    code, rec = run(capsys, "futaki", "--sigma", "lin:-1", "--samples", "3")
    assert code == 2


def test_calibrate_command(capsys):
    code, rec = run(capsys, "calibrate", "--sigma", "neglog:2")
    assert code == 0
    assert rec["a_star"] == pytest.approx(0.5276195, abs=1e-6)


def test_eigen_command(capsys):
    code, rec = run(capsys, "eigen", "--sigma", "zero")
    assert code == 0
    assert len(rec["lambda1"]) == 1
    assert rec["lambda1"][0]["eigenvalue"] == pytest.approx(-1.0, abs=1e-8)


def test_verify_geometry(capsys):
    code, rec = run(capsys, "verify", "--suite", "geometry", "--grid", "48")
    assert code == 0
    assert all(c["pass"] for c in rec["results"])


def test_scan_is_seeded(capsys, tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert main(["scan", "--sigma", "quad:0.5", "--amps", "0.1", "--samples", "4", "--seed", "3", "--csv", str(a)]) == 0
    assert main(["scan", "--sigma", "quad:0.5", "--amps", "0.1", "--samples", "4", "--seed", "3", "--csv", str(b)]) == 0
    capsys.readouterr()
    assert a.read_text() == b.read_text()


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "emsphere", "obstruction", "--sigma", "zero"],
                         capture_output=True, text=True, check=False)
    assert out.returncode == 0
    assert json.loads(out.stdout)["obstruction"] == pytest.approx(0.0, abs=1e-14)


def test_verify_coarse_grid_fails(capsys):
    code, rec = run(capsys, "verify", "--suite", "solver", "--grid", "16")
    assert code == 1
    assert not all(c["pass"] for c in rec["results"])
