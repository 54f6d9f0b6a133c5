import csv
import io
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from catbench.cli import COLUMNS, EXIT_ANOMALY, EXIT_INVALID, EXIT_OK, main
from catbench.qstate import DensityMatrix, HermitianOperator, matrix_from_json
from catbench.scenario_io import ScenarioSpec, dumps, load_scenario, validate_report

ROOT = Path(__file__).resolve().parent.parent
SCEN = ROOT / "scenarios"
SZ = HermitianOperator(np.diag([1.0, -1.0]))


def write_spec(path, spec):
    path.write_text(dumps(spec.to_json()))
    return str(path)


def run(argv, capsys):
    rc = main([str(a) for a in argv])
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_extract_full_two_level_k1(capsys):
    rc, out, _ = run(["extract-full", SCEN / "two_level_k1.json"], capsys)
    doc = json.loads(out)
    assert rc == EXIT_OK and doc["status"] == "ok"
    assert abs(doc["scalars"]["extracted"] - 2.0) < 1e-10
    assert abs(doc["scalars"]["ergotropy"] - 2.0) < 1e-10
    u = matrix_from_json(doc["operators"]["joint_unitary"])
    assert np.abs(u.conj().T @ u - np.eye(4)).max() < 1e-10


def test_extract_full_k05(capsys):
    rc, out, _ = run(["extract-full", SCEN / "two_level_k05.json"], capsys)
    s = json.loads(out)["scalars"]
    assert rc == 0
    assert abs(s["extracted"] - 1.5) < 1e-10 and abs(s["ergotropy"] - 1.0) < 1e-10


def test_ergotropy_maximally_mixed(capsys):
    rc, out, _ = run(["ergotropy", SCEN / "contrast.json"], capsys)
    doc = json.loads(out)
    assert rc == 0 and doc["scalars"]["ergotropy"] == 0
    assert doc["scalars"]["energy"] == 0


def test_nogo_correlated_random_qubit(capsys):
    rc, out, _ = run(["nogo-correlated", SCEN / "random_qubit.json", "--budget", 200, "--seed", 7], capsys)
    doc = json.loads(out)
    assert rc == EXIT_OK
    assert doc["scalars"]["violated"] is False
    assert doc["options"] == {"budget": 200, "seed": 7}
    assert doc["scalars"]["best_extraction"] <= doc["scalars"]["ergotropy"] + 1e-4


def test_nogo_uncorrelated_qutrit_battery(capsys):
    rc, out, _ = run(["nogo-uncorrelated", SCEN / "qutrit_battery.json", "--budget", 4], capsys)
    doc = json.loads(out)
    assert rc == 0 and doc["scalars"]["spectrum_anomalies"] == 0


def test_nogo_correlated_rejects_qutrit_battery(capsys):
    rc, _, err = run(["nogo-correlated", SCEN / "qutrit_battery.json", "--budget", 1], capsys)
    assert rc == EXIT_INVALID and "[qubit]" in err
    rc, out, _ = run(["nogo-correlated", SCEN / "qutrit_battery.json", "--budget", 2, "--exploratory"], capsys)
    assert rc == 0 and json.loads(out)["scalars"]["exploratory"] is True


def test_certify_ground_battery(capsys):
    rc, out, _ = run(["certify-passivity", SCEN / "ground_battery.json", "--budget", 4, "--full"], capsys)
    doc = json.loads(out)
    assert rc == 0
    assert doc["scalars"]["passive"] is True and doc["scalars"]["agreement"] is True
    assert set(doc["operators"]) == {"Cpp", "Ctilde"}


def test_certify_without_search(capsys):
    rc, out, _ = run(["certify-passivity", SCEN / "two_level_k1.json", "--budget", 0], capsys)
    doc = json.loads(out)
    assert rc == 0 and doc["scalars"]["passive"] is False and doc["scalars"]["agreement"] is None


def test_anomaly_exit_code(capsys):
    # a negative drift tolerance turns every run into an anomaly
    rc, out, _ = run(["extract-full", SCEN / "two_level_k1.json", "--tol", "cat=-1"], capsys)
    doc = json.loads(out)
    assert rc == EXIT_ANOMALY
    assert doc["status"] == "anomaly" and "drift" in doc["notes"][0]


def test_malformed_matrix_names_invariant(tmp_path, capsys):
    doc = json.loads((SCEN / "two_level_k1.json").read_text())
    doc["scenario"]["H_B"]["entries"][0][1] = [0.5, 0.0]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    rc, out, err = run(["ergotropy", bad], capsys)
    assert rc == EXIT_INVALID and out == ""
    assert "[hermitian]" in err and "H_B" in err


@pytest.mark.parametrize(
    "edit, tag",
    [
        (lambda d: d["scenario"]["rho_B"]["entries"][0].__setitem__(0, [2.0, 0.0]), "unit-trace"),
        (lambda d: d.__setitem__("version", "9"), "version"),
        (lambda d: d["scenario"].pop("rho_B"), "missing-field"),
        (lambda d: d["scenario"]["tolerances"].__setitem__("bogus", 1.0), "tolerance-name"),
    ],
)
def test_invalid_files(tmp_path, capsys, edit, tag):
    doc = json.loads((SCEN / "two_level_k1.json").read_text())
    edit(doc)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    rc, _, err = run(["ergotropy", bad], capsys)
    assert rc == EXIT_INVALID and f"[{tag}]" in err


def test_unreadable_and_bad_arguments(tmp_path, capsys):
    (tmp_path / "junk.json").write_text("{not json")
    assert run(["ergotropy", tmp_path / "junk.json"], capsys)[0] == EXIT_INVALID
    assert run(["ergotropy", tmp_path / "absent.json"], capsys)[0] == EXIT_INVALID
    with pytest.raises(SystemExit) as e:
        main(["no-such-command"])
    assert e.value.code == EXIT_INVALID
    assert run(["ergotropy", SCEN / "contrast.json", "--tol", "opt"], capsys)[0] == EXIT_INVALID
    assert run(["extract-full", SCEN / "contrast.json", "--budget", -1], capsys)[0] == EXIT_INVALID


def test_missing_catalyst(tmp_path, capsys):
    path = write_spec(tmp_path / "nocat.json", ScenarioSpec(DensityMatrix(np.diag([0.9, 0.1])), SZ))
    rc, out, _ = run(["extract-full", path], capsys)
    # falls back to the battery Hamiltonian for the catalyst
    assert rc == 0 and abs(json.loads(out)["scalars"]["extracted"] - 1.8) < 1e-10
    rc, _, err = run(["nogo-correlated", path, "--budget", 1], capsys)
    assert rc == EXIT_INVALID and "[missing-field]" in err


def test_report_round_trip(tmp_path, capsys):
    out = tmp_path / "rep.json"
    assert run(["extract-full", SCEN / "two_level_k05.json", "--out", out], capsys)[0] == 0
    doc = validate_report(json.loads(out.read_text()))
    cat = matrix_from_json(doc["states"]["catalyst"])
    psi = np.array([np.sqrt(0.75), np.sqrt(0.25)])
    assert np.abs(cat - np.outer(psi, psi)).max() < 1e-11
    assert doc["tolerances"]["cat"] == 1e-9


def test_reports_are_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        run(["nogo-uncorrelated", SCEN / "random_qubit.json", "--budget", 3, "--seed", 5, "--out", p], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_tol_override_is_reported(capsys):
    rc, out, _ = run(["ergotropy", SCEN / "contrast.json", "--tol", "opt=1e-3", "--tol", "con=2e-5"], capsys)
    tol = json.loads(out)["tolerances"]
    assert rc == 0 and tol["opt"] == 1e-3 and tol["con"] == 2e-5 and tol["herm"] == 1e-9


def test_scenario_tolerances_are_applied(tmp_path):
    spec = ScenarioSpec(DensityMatrix(np.diag([0.5, 0.5])), SZ)
    doc = spec.to_json()
    doc["scenario"]["tolerances"] = {"opt": 0.5}
    p = tmp_path / "t.json"
    p.write_text(json.dumps(doc))
    assert load_scenario(p).tolerances.opt == 0.5
    assert load_scenario(p, {"opt": 0.25}).tolerances.opt == 0.25


def test_csv_format(capsys):
    rc, out, _ = run(["ergotropy", SCEN / "two_level_k1.json", "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rc == 0 and len(rows) == 1 and float(rows[0]["ergotropy"]) == 2.0


def test_sweep_k_grid_writes_csv_and_png(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    rc, _, _ = run(["sweep", SCEN / "two_level_k1.json", "--param", "k", "--grid", "0,0.25,0.5,0.75,1",
                    "--format", "csv", "--out", out], capsys)
    assert rc == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert list(rows[0]) == ["point", "param", "value", "status"] + COLUMNS["extract-full"]
    for row in rows:
        k = float(row["value"])
        assert abs(float(row["extracted"]) - (1 + k)) < 1e-10
        assert abs(float(row["ergotropy"]) - 2 * k) < 1e-10
    png = out.with_suffix(".png")
    assert png.exists() and png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_sweep_other_params(tmp_path, capsys):
    rc, out, _ = run(["sweep", SCEN / "two_level_k1.json", "--param", "h_B", "--grid", "0.5,2"], capsys)
    rows = json.loads(out)["rows"]
    assert rc == 0 and [r["extracted"] for r in rows] == [1.0, 4.0]
    rc, out, _ = run(["sweep", SCEN / "qutrit_catalyst.json", "--param", "d_C", "--grid", "2,3",
                      "--command", "nogo-correlated", "--budget", 2], capsys)
    assert rc == 0 and len(json.loads(out)["rows"]) == 2
    rc, out, _ = run(["sweep", SCEN / "random_qubit.json", "--param", "seed", "--grid", "1,2",
                      "--command", "certify-passivity", "--budget", 0], capsys)
    assert rc == 0
    rc, out, _ = run(["sweep", SCEN / "two_level_k1.json", "--param", "h_C", "--grid", "3", "--no-plot"], capsys)
    assert rc == 0


def test_sweep_empty_grid_and_bad_param(tmp_path, capsys):
    out = tmp_path / "empty.csv"
    rc, _, _ = run(["sweep", SCEN / "two_level_k1.json", "--param", "k", "--grid", "", "--format", "csv",
                    "--out", out], capsys)
    assert rc == 0
    assert out.read_text().strip() == ",".join(["point", "param", "value", "status"] + COLUMNS["extract-full"])
    assert not out.with_suffix(".png").exists()
    rc, _, err = run(["sweep", SCEN / "two_level_k1.json", "--param", "temperature", "--grid", "1"], capsys)
    assert rc == EXIT_INVALID and "[sweep-param]" in err
    rc, _, err = run(["sweep", SCEN / "two_level_k1.json", "--param", "k", "--grid", "1.5"], capsys)
    assert rc == EXIT_INVALID
    rc, _, err = run(["sweep", SCEN / "two_level_k1.json", "--param", "k", "--grid", "a,b"], capsys)
    assert rc == EXIT_INVALID and "[sweep-grid]" in err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "catbench", "ergotropy", str(SCEN / "two_level_k1.json")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["scalars"]["ergotropy"] == 2.0


def test_contrast_script():
    env = dict(os.environ, CATBENCH=f"{sys.executable} -m catbench")
    r = subprocess.run(["bash", str(ROOT / "scripts" / "contrast_demo.sh")], capture_output=True, text=True, env=env)
    assert r.returncode == 0, r.stdout + r.stderr
    assert r.stdout.count("PASS") == 4
