import json
import math
import subprocess
import sys

import numpy as np
import pytest

from frank_defect import cli
from frank_defect.errors import IterationError
from frank_defect.profile_ode import closed_form_one_constant

PI = math.pi


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_json_matches_closed_form(capsys):
    code, out, _ = run(capsys, "solve", "--k1", "1", "--k3", "1", "--t", repr(PI / 4))
    assert code == 0
    data = json.loads(out)
    theta = np.array(data["theta"])
    psi = np.array(data["psi"])
    assert np.max(np.abs(psi - closed_form_one_constant(PI / 4, theta))) < 1e-8
    assert data["config"]["command"] == "solve"


def test_solve_csv_has_header_and_columns(capsys):
    code, out, _ = run(capsys, "solve", "--k1", "2", "--k3", "1", "--t", "1", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# ")
    header = json.loads(lines[0][2:])
    assert header["config"]["k1"] == 2.0
    assert lines[1] == "theta,psi,psi_prime,chi"
    first, last = lines[2].split(","), lines[-1].split(",")
    assert float(first[1]) == 0.0 and float(last[1]) == pytest.approx(PI, abs=1e-12)


def test_solve_svg(tmp_path):
    out = tmp_path / "p.svg"
    assert cli.main(["solve", "--k1", "2", "--k3", "1", "--t", "1", "--format", "svg", "--out", str(out)]) == 0
    text = out.read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text


def test_svg_is_deterministic(tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    for path in (a, b):
        cli.main(["solve", "--k1", "2", "--k3", "1", "--t", "1", "--format", "svg", "--out", str(path)])
    assert a.read_bytes() == b.read_bytes()


def test_energy_hedgehog(capsys):
    code, out, _ = run(capsys, "energy", "--k1", "2", "--k3", "1", "--t", repr(PI / 2), "--direct")
    data = json.loads(out)
    assert code == 0
    assert data["total"] == pytest.approx(16 * PI, rel=1e-10)
    assert data["direct"] == pytest.approx(16 * PI, rel=1e-8)
    assert data["metadata"]["sigma"] == -1


def test_verify_passes(capsys):
    code, out, _ = run(capsys, "verify", "--k1", "2", "--k3", "1", "--t", "1")
    data = json.loads(out)
    assert code == 0
    assert data["checks"] and all(c["passed"] for c in data["checks"])
    names = {c["name"] for c in data["checks"]}
    assert {"first_integral", "reduced_vs_direct", "degree", "bracket"} <= names


def test_sweep_csv(capsys):
    code, out, _ = run(
        capsys, "sweep", "--k1", "2", "--k3", "1", "--t-min", "0.5", "--t-max", "2.5",
        "--t-steps", "3", "--format", "csv",
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[1] == "t,k1,k3,J,chi0,chipi,degree"
    rows = [line.split(",") for line in lines[2:]]
    assert [float(r[0]) for r in rows] == [0.5, 1.5, 2.5]
    assert all(r[-1] == "1" for r in rows)


def test_sweep_matches_energy(capsys):
    _, sweep, _ = run(capsys, "sweep", "--k1", "4", "--k3", "1", "--t-min", "1", "--t-max", "2", "--t-steps", "2")
    _, energy, _ = run(capsys, "energy", "--k1", "4", "--k3", "1", "--t", "1")
    rows = json.loads(sweep)["rows"]
    assert rows[0]["J"] == json.loads(energy)["total"]


def test_probe(capsys):
    code, out, _ = run(capsys, "probe", "--k1", "4", "--k3", "1", "--t", "1", "--n-perturbations", "3")
    data = json.loads(out)
    assert code == 0
    assert len(data["rows"]) == 3 * 4
    assert min(r["delta_J"] for r in data["rows"]) >= -1e-10


def test_degrees_flag(capsys):
    _, deg, _ = run(capsys, "energy", "--k1", "2", "--k3", "1", "--t", "90", "--degrees")
    _, rad, _ = run(capsys, "energy", "--k1", "2", "--k3", "1", "--t", repr(PI / 2))
    assert json.loads(deg)["total"] == pytest.approx(json.loads(rad)["total"], rel=1e-14)


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"k1": 4.0, "k3": 1.0, "t": 1.0}))
    _, out, _ = run(capsys, "energy", "--config", str(cfg))
    assert json.loads(out)["config"]["k1"] == 4.0
    _, out, _ = run(capsys, "energy", "--config", str(cfg), "--k1", "2")
    assert json.loads(out)["config"]["k1"] == 2.0


def test_config_unknown_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"k1": 4.0, "colour": "red"}))
    code, _, err = run(capsys, "energy", "--config", str(cfg))
    assert code == 2 and "colour" in err


def test_output_independent_of_destination(tmp_path, capsys):
    args = ["energy", "--k1", "2", "--k3", "1", "--t", "1"]
    _, stdout_text, _ = run(capsys, *args)
    target = tmp_path / "e.json"
    assert cli.main(args + ["--out", str(target)]) == 0
    assert target.read_text() == stdout_text


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--k1", "-1", "--k3", "1", "--t", "1"],
        ["solve", "--k1", "1", "--k3", "1", "--t", "0"],
        ["solve", "--k1", "1", "--k3", "1", "--t", "1", "--tol", "1e-16"],
        ["energy", "--k1", "1", "--k3", "1", "--t", "1", "--grid-r", "15"],
        ["energy", "--k1", "1", "--k3", "1", "--t", "1", "--grid-theta", "8"],
        ["energy", "--k1", "1", "--k3", "1", "--t", "1", "--format", "csv"],
        ["sweep", "--k1", "1", "--k3", "1", "--t-min", "0", "--t-max", "1"],
        ["probe", "--k1", "1", "--k3", "1", "--t", "1", "--n-perturbations", "0"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == "" and err.startswith("frank-defect: error:")


def test_numerical_failure_exits_1(monkeypatch, capsys):
    def failing(cfg):
        raise IterationError("no convergence", grad_norm=1.0)

    monkeypatch.setitem(cli.HANDLERS, "solve", failing)
    code, out, err = run(capsys, "solve", "--k1", "1", "--k3", "1", "--t", "1")
    assert code == 1 and out == "" and "numerical failure" in err


def test_console_script_and_thread_determinism():
    argv = [sys.executable, "-m", "frank_defect.cli", "sweep", "--k1", "2", "--k3", "1",
            "--t-min", "0.5", "--t-max", "2.5", "--t-steps", "4", "--format", "csv"]
    serial = subprocess.run(argv, capture_output=True, text=True, env={"FRANK_DEFECT_THREADS": "1", "PATH": ""})
    parallel = subprocess.run(argv, capture_output=True, text=True, env={"FRANK_DEFECT_THREADS": "3", "PATH": ""})
    assert serial.returncode == parallel.returncode == 0
    assert serial.stdout == parallel.stdout
