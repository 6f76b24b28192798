from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eipnet.model import (
    EipInstance, Enterprise, InstanceError, ParkOperation, Prices, compute_discharge,
    derive_constants, park_costs, piecewise_discharge, validate_instance,
)

# stand-alone water and cost columns of the case-study result table
SA_WATER_15 = [75.00, 30.00, 50.00, 37.50, 5.00, 25.00, 22.00, 12.50, 37.50, 4.00,
               33.33, 40.00, 66.67, 37.50, 14.44]
SA_COST_15 = [26.25, 10.50, 17.50, 13.13, 1.75, 8.75, 7.70, 4.38, 13.13, 1.40,
              11.67, 14.00, 23.33, 13.13, 5.06]


def test_stand_alone_columns_match_case_study(inst15):
    const = derive_constants(inst15)
    np.testing.assert_allclose(const.sa_water, SA_WATER_15, atol=5e-3)
    np.testing.assert_allclose(const.stc, SA_COST_15, atol=5e-3)


def _exact_constants(inst):
    # rational oracle, independent of the numpy code path
    p = inst.prices
    c, beta, gamma, a = (Fraction(str(v)) for v in (p.c, p.beta, p.gamma, p.horizon_a))
    out = []
    for e in inst.enterprises:
        m, ci, co = Fraction(str(e.m)), Fraction(str(e.c_in)), Fraction(str(e.c_out))
        sa = m / co
        act = m / (co - ci)
        delta = act - sa
        out.append((sa, act, delta, (c + beta) / (c - gamma) * delta, a * (c + beta) * sa))
    k = (len(inst.enterprises) - 1) * sum(r[0] for r in out)
    return out, k


def test_derived_constants_against_rational_oracle(inst15, inst10):
    for inst in (inst15, inst10):
        const = derive_constants(inst)
        rows, k = _exact_constants(inst)
        for i, (sa, act, delta, thr, stc) in enumerate(rows):
            assert const.sa_water[i] == pytest.approx(float(sa), rel=1e-14)
            assert const.active_water[i] == pytest.approx(float(act), rel=1e-14)
            assert const.delta[i] == pytest.approx(float(delta), rel=1e-12, abs=1e-12)
            assert const.threshold[i] == pytest.approx(float(thr), rel=1e-12, abs=1e-12)
            assert const.stc[i] == pytest.approx(float(stc), rel=1e-14)
        assert const.k_bigm == pytest.approx(float(k), rel=1e-14)


def test_zero_inlet_concentration_gives_exact_zero_jump():
    inst = EipInstance((Enterprise(1, 0.0, 200.0, 6000.0),), Prices(0.13, 0.22, 0.01), 0.9)
    const = derive_constants(inst)
    assert const.delta[0] == 0.0
    assert const.threshold[0] == 0.0


@pytest.mark.parametrize("mutate, fragment", [
    (lambda e: Enterprise(e.id, -1.0, e.c_out, e.m), "c_in >= 0"),
    (lambda e: Enterprise(e.id, e.c_out, e.c_out, e.m), "c_in < c_out"),
    (lambda e: Enterprise(e.id, e.c_in, e.c_out, 0.0), "m > 0"),
    (lambda e: Enterprise(e.id, float("nan"), e.c_out, e.m), "non-finite"),
])
def test_validation_names_the_violation(inst10, mutate, fragment):
    ents = list(inst10.enterprises)
    ents[3] = mutate(ents[3])
    with pytest.raises(InstanceError, match=fragment) as info:
        validate_instance(EipInstance(tuple(ents), inst10.prices, inst10.alpha))
    assert "enterprise 4" in str(info.value)


@pytest.mark.parametrize("prices, alpha, fragment", [
    (Prices(0.01, 0.22, 0.13), 0.9, "c > gamma"),
    (Prices(0.13, -0.2, 0.01), 0.9, "beta"),
    (Prices(0.13, 0.22, 0.01), 1.0, "alpha"),
    (Prices(0.13, 0.22, 0.01), 0.0, "alpha"),
])
def test_validation_of_prices_and_alpha(inst10, prices, alpha, fragment):
    with pytest.raises(InstanceError, match=fragment):
        validate_instance(EipInstance(inst10.enterprises, prices, alpha))


def test_stand_alone_operation_costs_equal_stc(inst15):
    op = ParkOperation.stand_alone(inst15)
    const = derive_constants(inst15)
    np.testing.assert_allclose(park_costs(op, inst15), const.stc, rtol=1e-14)
    np.testing.assert_allclose(op.discharge, const.sa_water, rtol=1e-14)
    assert const.sa_water.sum() == pytest.approx(490.44, abs=0.01)
    assert const.stc.sum() == pytest.approx(171.66, abs=0.01)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6))
def test_derived_discharge_closes_the_water_balance(seed, n):
    from conftest import random_instance

    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n)
    const = derive_constants(inst)
    flux = np.zeros((n, n))
    for k in range(n):
        for i in range(n):
            if k != i and rng.random() < 0.3:
                flux[k, i] = rng.uniform(0, 1) * const.sa_water[k] / n
    inflow = flux.sum(0)
    act = inflow > 0
    water_in = np.where(act, const.active_water, const.sa_water)
    z = water_in - inflow
    op = ParkOperation(z, flux, np.zeros(n, bool), act, np.zeros(n, bool))
    disc = compute_discharge(op, inst)
    np.testing.assert_allclose(disc, piecewise_discharge(flux, inst, 0.0))
    # water: z + in = out + sink
    np.testing.assert_allclose(z + inflow, flux.sum(1) + disc, atol=1e-9)
