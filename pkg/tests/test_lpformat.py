import numpy as np
import pytest

from conftest import random_instance
from eipnet.engine import MipModel
from eipnet.engine.lpformat import write_lp
from eipnet.reduction import build, solve


def _read_back(path):
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    h.run()
    return h


def test_sections_and_binaries(inst10):
    rp = build(inst10, "gap")
    text = write_lp(rp.model)
    heads = [ln for ln in text.splitlines() if ln and not ln.startswith((" ", "\\"))]
    assert heads == ["Minimize", "Subject To", "Bounds", "Binary", "End"]
    binary = text.split("Binary\n")[1].split("End")[0].split()
    assert len(binary) == 30 and "ynull_1" in binary


@pytest.mark.parametrize("seed", range(3))
def test_highs_reads_back_the_same_optimum(tmp_path, seed):
    inst = random_instance(np.random.default_rng(seed), 4)
    rp = build(inst, "epsilon")
    path = tmp_path / "m.lp"
    path.write_text(write_lp(rp.model))
    h = _read_back(path)
    assert h.getInfo().objective_function_value == pytest.approx(solve(rp).objective, abs=1e-6)
    assert h.getLp().num_col_ == rp.model.num_vars


def test_bounds_and_free_variables(tmp_path):
    mdl = MipModel("b")
    x = mdl.add_var("x", lb=-np.inf, ub=np.inf)
    y = mdl.add_var("y[1]", lb=-2.0, ub=3.0)
    z = mdl.add_var("z", lb=1.5)
    mdl.add_constr([(x, 1.0), (y, 1.0)], ">=", -1.0)
    mdl.add_constr([(x, 1.0), (z, -1.0)], "<=", 0.5)
    mdl.set_objective([(x, 1.0), (y, -1.0), (z, 0.1)])
    text = write_lp(mdl)
    assert "y_1_" in text and " x free" in text
    path = tmp_path / "b.lp"
    path.write_text(text)
    h = _read_back(path)
    # min x - y + 0.1 z with x + y >= -1, x <= z + 0.5, y <= 3, z >= 1.5
    assert h.getInfo().objective_function_value == pytest.approx(-7.0 + 0.15)


def test_coefficients_are_printed_losslessly():
    mdl = MipModel()
    x = mdl.add_var("x")
    mdl.add_constr([(x, 0.1 + 0.2)], "<=", 1 / 3)
    mdl.set_objective([(x, -1.0)])
    text = write_lp(mdl)
    assert repr(0.1 + 0.2) in text and repr(1 / 3) in text
