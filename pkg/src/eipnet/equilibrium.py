"""Best-response audit of a park operation.

Each enterprise controls its fresh water ``z_i`` and its inlet fluxes
``F_{k,i}``; everything it sends out is decided by its partners.  Given the
rest of the park, its best reply is the cheaper of

* the semi-stand-alone reply (no inflow, ``z_i = M_i/C_out``), admissible
  only while its outgoing commitments do not exceed that water, and
* the best active reply, a small LP over the inlet fluxes it may open in
  the network.

Since ``c > gamma``, the active cost falls as inflow rises, so the active
LP simply pushes as much acceptable water in as possible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .model import (
    FEAS_TOL, DerivedConstants, EipInstance, ParkOperation, derive_constants,
    piecewise_discharge,
)

DEFAULT_REL_TOL = 1e-5
#: Relative slack forgiven when testing whether semi-stand-alone is possible.
SEMI_TOL = 1e-9


class Verdict(str, enum.Enum):
    NO_DEVIATION = "no-profitable-deviation"
    DEVIATION = "deviation-found"
    BOUNDARY = "boundary-infimum"


class PhysicalInfeasibility(ValueError):
    """The operation breaks a physical constraint; names the first one."""


@dataclass(frozen=True)
class BestResponse:
    value: float
    z: float
    inflow: np.ndarray  # F'_{k,i} for every k (0 on the diagonal)
    mode: str  # "semi-stand-alone" or "active"
    infimum: bool  # active optimum sits on the zero-inflow boundary


@dataclass(frozen=True)
class DeviationCertificate:
    enterprise: int  # 1-based id
    current_cost: float
    best_cost: float
    best_z: float | None
    best_inflow: np.ndarray | None
    mode: str
    verdict: Verdict
    excluded: bool = False

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.NO_DEVIATION

    def to_dict(self) -> dict:
        return {
            "enterprise": self.enterprise,
            "excluded": self.excluded,
            "current_cost": self.current_cost,
            "best_cost": self.best_cost,
            "best_z": self.best_z,
            "best_inflow": None if self.best_inflow is None else self.best_inflow.tolist(),
            "mode": self.mode,
            "verdict": self.verdict.value,
        }


@dataclass(frozen=True)
class EquilibriumAudit:
    certificates: tuple[DeviationCertificate, ...]

    @property
    def is_equilibrium(self) -> bool:
        return all(c.passed for c in self.certificates)

    @property
    def failures(self) -> list[DeviationCertificate]:
        return [c for c in self.certificates if not c.passed]

    def __iter__(self):
        return iter(self.certificates)

    def __len__(self):
        return len(self.certificates)


def lemma1_predicate(i: int, inflow: float, inst: EipInstance,
                     const: DerivedConstants | None = None) -> bool:
    """Whether active operation with ``inflow`` costs no more than semi-stand-alone.

    ``i`` is the 0-based position.  The comparison is against the
    profitability threshold ``(c+beta)/(c-gamma) * Delta_i``.
    """
    const = const or derive_constants(inst)
    return bool(inflow >= const.threshold[i])


def lemma2_predicate(i: int, op: ParkOperation, inst: EipInstance,
                     tol: float = FEAS_TOL, const: DerivedConstants | None = None) -> bool:
    """Activity of ``i`` agrees with "semi-stand-alone infeasible or unprofitable"."""
    const = const or derive_constants(inst)
    inflow = float(op.flux[:, i].sum())
    active = inflow > tol
    semi_infeasible = const.sa_water[i] - float(op.flux[i, :].sum()) < 0
    return active == (semi_infeasible or lemma1_predicate(i, inflow, inst, const))


def _cost(z, inflow, outflow, discharge, inst):
    p = inst.prices
    return p.horizon_a * (p.c * z + p.gamma * (inflow + outflow) + p.beta * discharge)


def best_response(i: int, op: ParkOperation, edges, inst: EipInstance,
                  const: DerivedConstants | None = None, *,
                  shared_capacity: bool = True,
                  tol: float = FEAS_TOL) -> BestResponse | None:
    """Cheapest reply of enterprise ``i`` (0-based) with the others held fixed.

    Parameters
    ----------
    edges : set of (int, int)
        Network with 1-based ids; only inlet edges ``(k, i)`` in it may
        carry flow.
    shared_capacity : bool
        Cap each ``F'_{k,i}`` by what supplier ``k`` currently sends plus
        what it discharges, so the reply leaves every partner's sink flux
        nonnegative.  With ``False`` only the enterprise's own constraints
        apply.

    Returns
    -------
    BestResponse or None
        ``None`` if neither reply is feasible.
    """
    const = const or derive_constants(inst)
    n = inst.n
    outflow = float(op.flux[i, :].sum())
    sa, act = float(const.sa_water[i]), float(const.active_water[i])
    cands = []
    # semi-stand-alone needs a nonnegative discharge; only rounding noise is
    # forgiven here, far below any epsilon margin
    if sa - outflow >= -SEMI_TOL * max(1.0, sa):
        cands.append(BestResponse(_cost(sa, 0.0, outflow, max(sa - outflow, 0.0), inst), sa,
                                  np.zeros(n), "semi-stand-alone", False))

    sources = [k for k in range(n) if k != i and (k + 1, i + 1) in edges]
    d_act = max(act - outflow, 0.0)
    if act - outflow >= -tol and sources:
        c_out = inst.c_out[sources]
        if shared_capacity:
            disc = piecewise_discharge(op.flux, inst)
            cap = np.maximum(op.flux[sources, i] + np.maximum(disc[sources], 0.0), 0.0)
        else:
            cap = np.full(len(sources), np.inf)
        # maximise inflow under the inlet limit and z = act - inflow >= 0
        res = linprog(-np.ones(len(sources)),
                      A_ub=np.vstack([c_out, np.ones(len(sources))]),
                      b_ub=[inst.c_in[i] * act, act],
                      bounds=list(zip(np.zeros(len(sources)), cap)), method="highs")
        if res.status == 0:
            f = np.zeros(n)
            f[sources] = np.maximum(res.x, 0.0)
            s = float(f.sum())
            z = act - s
            cands.append(BestResponse(_cost(z, s, outflow, d_act, inst), z, f,
                                      "active", s <= FEAS_TOL))
    elif act - outflow >= -tol:
        # no inlet edge: the active region is empty but its closure is z = act
        cands.append(BestResponse(_cost(act, 0.0, outflow, d_act, inst), act,
                                  np.zeros(n), "active", True))
    if not cands:
        return None
    return min(cands, key=lambda b: b.value)


def check_physical(op: ParkOperation, edges, inst: EipInstance,
                   tol: float = 1e-6) -> None:
    """Raise :class:`PhysicalInfeasibility` naming the first broken constraint."""
    n = inst.n
    const = derive_constants(inst)
    if op.z.shape != (n,) or op.flux.shape != (n, n):
        raise PhysicalInfeasibility(f"operation shape does not match {n} enterprises")
    if np.any(np.diag(op.flux) != 0):
        raise PhysicalInfeasibility("self-loop flux on the diagonal")
    for i in range(n):
        if op.z[i] < -tol:
            raise PhysicalInfeasibility(f"z >= 0 violated for enterprise {i + 1}")
        for k in range(n):
            if k == i:
                continue
            if op.flux[k, i] < -tol:
                raise PhysicalInfeasibility(f"F >= 0 violated on edge ({k + 1},{i + 1})")
            if op.flux[k, i] > tol and (k + 1, i + 1) not in edges:
                raise PhysicalInfeasibility(f"flux on edge ({k + 1},{i + 1}) outside the network")
    disc = piecewise_discharge(op.flux, inst, tol)
    inflow, outflow = op.inflow, op.outflow
    c_in, c_out = inst.c_in, inst.c_out
    for i in range(n):
        if disc[i] < -tol:
            raise PhysicalInfeasibility(f"discharge >= 0 violated for enterprise {i + 1}")
        if abs(op.z[i] + inflow[i] - outflow[i] - disc[i]) > tol:
            raise PhysicalInfeasibility(f"water balance violated for enterprise {i + 1}")
        load = float(c_out @ op.flux[:, i])
        if load - c_in[i] * (op.z[i] + inflow[i]) > tol * max(1.0, c_out.max()):
            raise PhysicalInfeasibility(f"inlet concentration violated for enterprise {i + 1}")
        if op.y_null[i]:
            if inflow[i] > tol or outflow[i] > tol or abs(op.z[i] - const.sa_water[i]) > tol:
                raise PhysicalInfeasibility(
                    f"excluded enterprise {i + 1} does not operate stand-alone")


def verify_equilibrium(op: ParkOperation, edges, inst: EipInstance,
                       rel_tol: float = DEFAULT_REL_TOL, abs_tol: float = 0.0,
                       feas_tol: float = 1e-6, shared_capacity: bool = True) -> EquilibriumAudit:
    """Audit every enterprise's best reply.

    The operation is checked physically first.  A certificate passes when
    no reply is cheaper than the current cost by more than
    ``max(rel_tol*|cost|, abs_tol)``.  Excluded enterprises are certified
    by their exact stand-alone operation.
    """
    check_physical(op, edges, inst, feas_tol)
    const = derive_constants(inst)
    disc = piecewise_discharge(op.flux, inst, feas_tol)
    certs = []
    for i in range(inst.n):
        current = float(_cost(op.z[i], op.flux[:, i].sum(), op.flux[i, :].sum(), disc[i], inst))
        if op.y_null[i]:
            certs.append(DeviationCertificate(i + 1, current, float(const.stc[i]),
                                              float(const.sa_water[i]), np.zeros(inst.n),
                                              "stand-alone", Verdict.NO_DEVIATION, True))
            continue
        br = best_response(i, op, edges, inst, const, shared_capacity=shared_capacity,
                           tol=feas_tol)
        if br is None:
            raise PhysicalInfeasibility(f"enterprise {i + 1} has no feasible reply")
        slack = max(rel_tol * abs(current), abs_tol)
        gain = current - br.value
        if gain <= slack:
            verdict = Verdict.NO_DEVIATION
        elif br.infimum and gain < 10 * slack:
            verdict = Verdict.BOUNDARY
        else:
            verdict = Verdict.DEVIATION
        certs.append(DeviationCertificate(i + 1, current, float(br.value), float(br.z),
                                          br.inflow, br.mode, verdict))
    return EquilibriumAudit(tuple(certs))
