import csv
import json

import numpy as np
import pytest

from eipnet.cli import main
from eipnet.io import instance_to_dict, load_instance, load_solution, read_flux_csv
from eipnet.model import EipInstance, Enterprise, Prices, park_costs


@pytest.fixture(scope="module")
def solved_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve10")
    assert main(["solve", "--instance", "eip10", "--out", str(out)]) == 0
    return out


def test_solve_writes_every_artifact(solved_dir):
    names = sorted(p.name for p in solved_dir.iterdir())
    assert names == ["flux.csv", "network.dot", "report.json", "report.txt", "solution.json"]
    rep = json.loads((solved_dir / "report.json").read_text())
    assert rep["status"] == "optimal" and rep["equilibrium"] is True
    assert rep["z_eps"] == pytest.approx(201.46, abs=0.05)
    assert "Z_eps = 201.46" in (solved_dir / "report.txt").read_text()


def test_flux_csv_reproduces_solution(solved_dir):
    inst = load_instance("eip10")
    op, _, _ = load_solution(solved_dir / "solution.json", inst)
    flux, sink = read_flux_csv(solved_dir / "flux.csv")
    np.testing.assert_array_equal(flux, op.flux)
    np.testing.assert_allclose(sink + flux.sum(1) - flux.sum(0), op.z, atol=1e-9)


def test_verify_round_trip(solved_dir, capsys):
    code = main(["verify", "--instance", "eip10", "--solution",
                 str(solved_dir / "solution.json")])
    out = capsys.readouterr().out
    assert code == 0 and "equilibrium: verified" in out
    inst = load_instance("eip10")
    op, _, _ = load_solution(solved_dir / "solution.json", inst)
    rep = json.loads((solved_dir / "report.json").read_text())
    costs = park_costs(op, inst)
    assert max(abs(r["park_cost"] - c) for r, c in zip(rep["rows"], costs)) <= 1e-9


def test_verify_fails_on_a_tampered_solution(solved_dir, tmp_path, capsys):
    doc = json.loads((solved_dir / "solution.json").read_text())
    doc["z"][0] += 5.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["verify", "--instance", "eip10", "--solution", str(path)]) == 3
    assert "physically infeasible" in capsys.readouterr().out


def test_verify_refuses_another_instance(solved_dir, capsys):
    code = main(["verify", "--instance", "eip10", "--alpha", "0.8", "--solution",
                 str(solved_dir / "solution.json")])
    assert code == 1
    assert "hash" in capsys.readouterr().err


def test_forced_limit_exits_with_best_bound(tmp_path, capsys):
    code = main(["solve", "--instance", "eip15", "--time-limit", "0.001",
                 "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 2
    assert "best bound:" in out


def test_one_enterprise_instance_runs_stand_alone(tmp_path, capsys):
    inst = EipInstance((Enterprise(1, 30, 100, 7500),), Prices(0.13, 0.22, 0.01), 0.95)
    path = tmp_path / "one.json"
    path.write_text(json.dumps(instance_to_dict(inst)))
    assert main(["solve", "--instance", str(path), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["rows"][0]["excluded"] is True
    assert rep["z_eps"] == pytest.approx(75.0)
    assert "exchanges: none" in capsys.readouterr().out


def test_validation_and_usage_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"enterprises": [{"id": 1}], "prices": {}}')
    assert main(["solve", "--instance", str(bad), "--out", str(tmp_path)]) == 1
    assert "c_in_ppm: missing" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main(["solve"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["solve", "--instance", "eip10", "--epsilon", "-1"])
    assert info.value.code == 1


def test_alpha_sweep_csv(tmp_path):
    path = tmp_path / "sweep.csv"
    code = main(["sweep", "--instance", "eip10", "--param", "alpha", "--min", "0.9",
                 "--max", "0.95", "--step", "0.05", "--out", str(path)])
    rows = list(csv.DictReader(path.open()))
    assert code == 0
    assert [r["alpha"] for r in rows] == ["0.9", "0.95"]
    assert all(r["equilibrium"] == "1" for r in rows)


def test_epsilon_sweep_csv(capsys):
    code = main(["sweep", "--instance", "eip10", "--param", "epsilon", "--min", "0",
                 "--max", "0", "--values", "1e-6,1e-2,1"])
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert code == 0
    z = [float(r["z_eps"]) for r in rows]
    assert all(b >= a - 1e-9 * a for a, b in zip(z, z[1:]))


def test_export_model(tmp_path):
    path = tmp_path / "m.lp"
    assert main(["export-model", "--instance", "eip10", "--variant", "gap",
                 "--out", str(path)]) == 0
    text = path.read_text()
    assert text.startswith("\\ eip_gap") and text.rstrip().endswith("End")
