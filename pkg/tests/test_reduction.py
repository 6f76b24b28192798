import math

import numpy as np
import pytest

from conftest import brute_force_mip, random_instance
from eipnet.engine import Status
from eipnet.equilibrium import check_physical, verify_equilibrium
from eipnet.model import EipInstance, Enterprise, ParkOperation, Prices, derive_constants
from eipnet.reduction import (
    build, effective_bigm, extract_network, extract_operation, satisfies_strict, solve,
    solve_methodology,
)


def _stand_alone_assignment(rp):
    """Solver vector of the all-excluded profile."""
    x = np.zeros(rp.model.num_vars)
    sa = rp.const.sa_water
    x[rp.z] = sa
    x[rp.d] = sa
    x[rp.y_null] = 1.0
    x[rp.y_pos] = 1.0
    return x


@pytest.mark.parametrize("variant", ["gap", "epsilon"])
@pytest.mark.parametrize("bigm", ["tight", "uniform"])
def test_stand_alone_profile_is_feasible(inst15, variant, bigm):
    rp = build(inst15, variant, 1e-6, bigm=bigm)
    x = _stand_alone_assignment(rp)
    assert rp.model.max_violation(x) <= 1e-9
    assert rp.model.evaluate(x) == pytest.approx(490.44, abs=0.01)


def test_model_dimensions(inst10):
    rp = build(inst10, "epsilon")
    n = inst10.n
    assert rp.model.num_vars == 2 * n + n * (n - 1) + 3 * n
    assert len(rp.model.binaries) == 3 * n
    assert len(rp.model.constraints) == 9 * n
    assert np.all(np.diag(rp.flux) == -1)


def test_zero_inlet_enterprises_are_fixed_inactive(inst15):
    rp = build(inst15, "epsilon")
    i = 1  # enterprise 2 has c_in = 0
    assert inst15.c_in[i] == 0
    assert rp.model.variables[rp.y_act[i]].ub == 0.0
    for k in range(inst15.n):
        if k != i:
            assert rp.model.variables[rp.flux[k, i]].ub == 0.0
    free = build(inst15, "epsilon", preprocess=False)
    assert free.model.variables[free.y_act[i]].ub == 1.0


def test_invalid_arguments():
    inst = EipInstance((Enterprise(1, 10, 100, 1000),), Prices(0.13, 0.22, 0.01), 0.9)
    with pytest.raises(ValueError, match="eps"):
        build(inst, "epsilon", 0.0)
    with pytest.raises(ValueError, match="variant"):
        build(inst, "strict")
    with pytest.raises(ValueError, match="big-M"):
        build(inst, bigm="huge")


def test_uniform_bigm_is_lifted_for_a_single_enterprise():
    inst = EipInstance((Enterprise(1, 10, 100, 1000),), Prices(0.13, 0.22, 0.01), 0.9)
    const = derive_constants(inst)
    assert const.k_bigm == 0.0
    assert effective_bigm(const, 1e-6) >= const.sa_water[0] + 1e-6


def test_single_enterprise_runs_stand_alone():
    inst = EipInstance((Enterprise(1, 10, 100, 1000),), Prices(0.13, 0.22, 0.01), 0.9)
    res = solve_methodology(inst)
    op = res.operation()
    assert res.status is Status.OPTIMAL
    assert res.z_eps == pytest.approx(10.0)
    assert op.y_null[0]


@pytest.mark.parametrize("seed", range(6))
def test_tight_and_uniform_big_m_share_the_optimum(seed):
    inst = random_instance(np.random.default_rng(seed), 3)
    a = solve(build(inst, "epsilon", bigm="tight"))
    b = solve(build(inst, "epsilon", bigm="uniform"))
    assert a.status is b.status is Status.OPTIMAL
    assert a.objective == pytest.approx(b.objective, abs=1e-6)


@pytest.mark.parametrize("seed", range(4))
def test_small_instances_match_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    inst = random_instance(rng, 2 + seed % 2)
    for variant in ("gap", "epsilon"):
        rp = build(inst, variant)
        sol = solve(rp)
        assert sol.status is Status.OPTIMAL
        assert sol.objective == pytest.approx(brute_force_mip(rp.model), abs=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_relaxation_bounds_the_epsilon_problem(seed):
    inst = random_instance(np.random.default_rng(200 + seed), 4)
    gap = solve(build(inst, "gap"))
    eps = solve(build(inst, "epsilon", 1e-3))
    assert gap.objective <= eps.objective + 1e-7


def test_extracted_operation_is_physical_and_consistent(inst10):
    rp = build(inst10, "epsilon")
    sol = solve(rp)
    op = extract_operation(rp, sol)
    edges = extract_network(op)
    check_physical(op, edges, inst10)
    assert op.discharge.sum() == pytest.approx(sol.objective, rel=1e-7)
    # every exchange is in the network and sinks are always present
    assert {(i + 1, 0) for i in range(inst10.n)} <= edges
    for k, i in zip(*np.nonzero(op.flux)):
        assert (k + 1, i + 1) in edges


def test_extract_requires_an_assignment(inst10):
    from eipnet.engine import MipSolution

    with pytest.raises(ValueError, match="no assignment"):
        extract_operation(build(inst10), MipSolution(Status.LIMIT))


def test_strictness_ignores_switched_off_rows(inst10):
    rp = build(inst10, "gap")
    from eipnet.engine import MipSolution

    sol = MipSolution(Status.OPTIMAL, _stand_alone_assignment(rp), 345.0)
    assert satisfies_strict(rp, sol)
    x = sol.x.copy()
    x[rp.y_pos[0]] = 0.0  # now the row binds and sa - 0 < 0 fails
    assert not satisfies_strict(rp, MipSolution(Status.OPTIMAL, x, 345.0))


def test_methodology_limit_without_incumbent(inst15):
    res = solve_methodology(inst15, node_limit=1, time_limit=1e-3)
    assert res.status is Status.LIMIT
    if res.eps_solution.x is None:
        assert math.isnan(res.z_eps)


@pytest.mark.parametrize("seed", range(8))
def test_methodology_output_is_an_equilibrium(seed):
    inst = random_instance(np.random.default_rng(300 + seed), 4)
    res = solve_methodology(inst)
    op = res.operation()
    audit = verify_equilibrium(op, extract_network(op), inst)
    assert audit.is_equilibrium
    assert res.z_bar <= res.z_eps + 1e-7
