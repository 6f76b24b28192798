import csv
import io
import math

import numpy as np
import pytest

from conftest import random_instance
from eipnet.analysis import (
    MonotonicityError, SweepPoint, SweepResult, alpha_sweep, build_report, epsilon_sweep,
    make_grid,
)
from eipnet.model import ParkOperation, derive_constants
from eipnet.reduction import solve_methodology


def test_make_grid_is_inclusive_and_rounded():
    g = make_grid(0.60, 0.95, 0.05)
    assert len(g) == 8 and g[0] == 0.6 and g[-1] == 0.95
    assert list(g) == [0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]
    assert list(make_grid(1.0, 1.0, 0.5)) == [1.0]
    with pytest.raises(ValueError):
        make_grid(1.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        make_grid(0.0, 1.0, 0.0)


def test_stand_alone_report(inst15):
    op = ParkOperation.stand_alone(inst15)
    rep = build_report(inst15, op)
    assert rep.totals.sa_water == pytest.approx(490.44, abs=0.01)
    assert rep.totals.sa_cost == pytest.approx(171.66, abs=0.01)
    assert rep.totals.reduction_pct == pytest.approx(0.0, abs=1e-12)
    text = rep.to_text()
    assert "490.44" in text and "171.66" in text
    # every numeral in the table has exactly two decimals
    for line in text.splitlines()[2:17]:
        for tok in line.replace("*", " ").split()[1:]:
            assert len(tok.split(".")[1]) == 2


def test_report_for_a_solved_park(inst10):
    res = solve_methodology(inst10)
    op = res.operation()
    rep = build_report(inst10, op, res, res.selection.audit)
    d = rep.to_dict()
    assert d["status"] == "optimal" and d["equilibrium"] is True
    assert len(d["rows"]) == 10 and len(d["certificates"]) == 10
    assert d["totals"]["park_water"] == pytest.approx(res.z_eps, rel=1e-9)
    const = derive_constants(inst10)
    for r in rep.rows:
        bound = (1.0 if r.excluded else inst10.alpha) * const.stc[r.enterprise - 1]
        assert r.park_cost <= bound + 1e-6


def test_sweep_csv_columns():
    res = SweepResult("alpha", [SweepPoint(0.6, 1.0, 2, 3.0, 1.0, 1.0, 0.5, 7, "optimal", True)])
    rows = list(csv.reader(io.StringIO(res.to_csv())))
    assert rows[0] == ["alpha", "z", "stand_alone", "total_cost", "z_bar", "z_eps", "gap",
                       "solve_time", "nodes", "status", "equilibrium"]
    assert rows[1][:4] == ["0.6", "1.0", "2", "3.0"] and rows[1][-1] == "1"


def test_alpha_sweep_on_small_park():
    inst = random_instance(np.random.default_rng(42), 4)
    grid = make_grid(0.6, 0.95, 0.05)
    res = alpha_sweep(inst, grid)
    assert list(res.grid) == list(grid)
    assert all(p.status == "optimal" and p.equilibrium for p in res.points)
    # a looser contract (larger alpha) never needs more fresh water
    assert np.all(np.diff(res.z) <= 1e-6)
    # stand-alone always meets the contract, so Z never exceeds it
    assert np.all(res.z <= derive_constants(inst).sa_water.sum() + 1e-6)


def test_alpha_sweep_rejects_bad_grids(inst10):
    with pytest.raises(ValueError):
        alpha_sweep(inst10, [0.9, 0.8])
    with pytest.raises(ValueError):
        alpha_sweep(inst10, [0.5, 1.0])


@pytest.mark.parametrize("seed", range(3))
def test_epsilon_sweep_is_monotone(seed):
    inst = random_instance(np.random.default_rng(500 + seed), 4)
    res = epsilon_sweep(inst, [1e-6, 1e-4, 1e-2, 1.0])
    z = [p.z_eps for p in res.points if not math.isnan(p.z_eps)]
    assert all(b >= a - 1e-6 for a, b in zip(z, z[1:]))
    assert all(v >= res.points[0].z_bar - 1e-6 for v in z)


def test_monotonicity_error_is_raised(monkeypatch):
    import eipnet.analysis as an

    inst = random_instance(np.random.default_rng(1), 2)
    real = an.solve
    calls = iter([None, 5.0, 3.0])

    def fake(rp, engine="internal", **kw):
        sol = real(rp, engine, **kw)
        val = next(calls)
        if val is not None:
            sol.objective = val
        return sol

    monkeypatch.setattr(an, "solve", fake)
    with pytest.raises(MonotonicityError):
        epsilon_sweep(inst, [1e-3, 1e-2])
