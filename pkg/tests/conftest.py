"""Shared fixtures, random-instance generators and independent oracles."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from eipnet.io import load_instance
from eipnet.model import EipInstance, Enterprise, Prices

# parameter ranges of the 15-enterprise case study
C_IN_RANGE = (0.0, 400.0)
C_OUT_RANGE = (50.0, 1000.0)
M_RANGE = (2000.0, 30000.0)
CASE_PRICES = Prices(0.13, 0.22, 0.01, 1.0)


@pytest.fixture(scope="session")
def inst15() -> EipInstance:
    return load_instance("eip15")


@pytest.fixture(scope="session")
def inst10() -> EipInstance:
    return load_instance("eip10")


def random_instance(rng: np.random.Generator, n: int, alpha: float | None = None,
                    zero_cin: float = 0.15) -> EipInstance:
    """Instance with parameters drawn inside the case-study ranges."""
    ents = []
    for i in range(n):
        c_out = float(rng.integers(C_OUT_RANGE[0] // 5, C_OUT_RANGE[1] // 5 + 1) * 5)
        if rng.random() < zero_cin:
            c_in = 0.0
        else:
            hi = min(C_IN_RANGE[1], c_out - 5)
            c_in = float(rng.integers(1, int(hi // 5) + 1) * 5)
        m = float(rng.integers(M_RANGE[0] // 100, M_RANGE[1] // 100 + 1) * 100)
        ents.append(Enterprise(i + 1, c_in, c_out, m))
    if alpha is None:
        alpha = float(rng.uniform(0.6, 0.95))
    return EipInstance(tuple(ents), CASE_PRICES, alpha)


def brute_force_mip(model) -> float:
    """Minimum over every binary assignment, one HiGHS LP per assignment.

    Returns ``inf`` when no assignment is feasible.  Independent of the
    package's own simplex and branch-and-bound.
    """
    import highspy

    c, a, sense, rhs, lb, ub = model.dense()
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    inf = highspy.kHighsInf
    lp = highspy.HighsLp()
    lp.num_col_, lp.num_row_ = len(c), len(rhs)
    lp.col_cost_ = c
    lp.col_lower_ = np.where(np.isinf(lb), -inf, lb)
    lp.col_upper_ = np.where(np.isinf(ub), inf, ub)
    lp.row_lower_ = np.where(sense == "<=", -inf, rhs)
    lp.row_upper_ = np.where(sense == ">=", inf, rhs)
    csc = _csc(a)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_, lp.a_matrix_.index_, lp.a_matrix_.value_ = csc
    h.passModel(lp)
    bins = model.binaries
    best = np.inf
    for prof in itertools.product((0.0, 1.0), repeat=len(bins)):
        vals = np.array(prof)
        h.changeColsBounds(len(bins), bins.astype(np.int32), vals, vals)
        h.run()
        if h.getModelStatus() == highspy.HighsModelStatus.kOptimal:
            best = min(best, h.getInfo().objective_function_value)
    return best


def _csc(a):
    start, index, value = [0], [], []
    for j in range(a.shape[1]):
        nz = np.nonzero(a[:, j])[0]
        index.extend(nz.tolist())
        value.extend(a[nz, j].tolist())
        start.append(len(index))
    return (np.array(start, dtype=np.int32), np.array(index, dtype=np.int32),
            np.array(value, dtype=float))


def max_clean_inflow(act: float, c_in: float, c_out_sources, caps) -> float:
    """Greedy fractional knapsack: cleanest sources first.

    Maximises total inflow subject to ``sum c_out_k F_k <= c_in * act``,
    ``sum F_k <= act`` and ``0 <= F_k <= cap_k``.
    """
    budget, room, total = c_in * act, act, 0.0
    for ck, cap in sorted(zip(c_out_sources, caps)):
        take = min(cap, room, budget / ck if ck > 0 else np.inf)
        if take <= 0:
            break
        total += take
        room -= take
        budget -= ck * take
    return total
