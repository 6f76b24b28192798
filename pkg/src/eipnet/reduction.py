"""Single-level mixed-integer programs for the park design problem.

The designer's bilevel problem is replaced by a MIP over ``(y, z, F)``
where each enterprise carries three flags:

* ``y_null`` -- the enterprise is excluded and runs stand-alone,
* ``y_act``  -- its discharge uses the active (inflow > 0) expression,
* ``y_pos``  -- semi-stand-alone would be physically possible for it, so
  its inflow must reach the profitability threshold.

The piecewise discharge of an enterprise never appears explicitly: its
case split is carried by ``y_act``.  Two variants are built.  ``epsilon``
closes the strict "semi-stand-alone is infeasible" inequality with a
margin ``eps > 0``; ``gap`` uses margin 0, giving a relaxation whose value
bounds the exact optimum from below.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .engine import MipModel, MipSolution, Status, solve_mip
from .engine.external import solve_external
from .equilibrium import EquilibriumAudit, PhysicalInfeasibility, verify_equilibrium
from .model import (
    DerivedConstants, EipInstance, ParkOperation, compute_discharge, derive_constants,
    validate_instance,
)

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-6
FLUX_TOL = 1e-7
BIGM_MODES = ("tight", "uniform")
#: Secondary objectives tried, in order, when the first optimum is not an
#: equilibrium.  Each is minimised over the optimal face.
SELECTION_ORDER = ("min-load", "min-inlet-slack")
SELECTION_NODE_LIMIT = 5000
SELECTION_MAX_SOLVES = 60
#: Relative slack on the optimal value when searching the optimal face.
FACE_SLACK = 1e-7


class ConsistencyError(RuntimeError):
    """The solver assignment disagrees with the recomputed discharge."""


@dataclass(frozen=True)
class ReducedProblem:
    inst: EipInstance
    const: DerivedConstants
    variant: str
    eps: float
    k_bigm: float
    model: MipModel
    z: np.ndarray
    d: np.ndarray
    flux: np.ndarray  # n x n variable indices, -1 on the diagonal
    y_null: np.ndarray
    y_act: np.ndarray
    y_pos: np.ndarray
    bigm: str = "tight"
    m_flow: np.ndarray = field(default=None)  # exclusion / activity constants
    m_pos: np.ndarray = field(default=None)  # semi-stand-alone constants
    m_prof: np.ndarray = field(default=None)  # profitability constants

    @property
    def n(self) -> int:
        return self.inst.n


def effective_bigm(const: DerivedConstants, eps: float) -> float:
    """Park-wide big-M used in ``uniform`` mode.

    The constant ``(n-1) * sum(M_i/C_out_i)`` is kept whenever it already
    dominates every per-enterprise requirement; it is only lifted when the
    stand-alone profile would otherwise be cut off (e.g. a one-enterprise
    park, where the constant is zero).
    """
    need = max(float(np.max(const.sa_water)) + eps, float(np.max(const.threshold)))
    if const.k_bigm >= need:
        return const.k_bigm
    log.warning("big-M %.6g lifted to %.6g so that stand-alone stays feasible",
                const.k_bigm, need)
    return need


def build(inst: EipInstance, variant: str = "epsilon", eps: float = DEFAULT_EPSILON,
          preprocess: bool = True, bigm: str = "tight") -> ReducedProblem:
    """Assemble the auxiliary MIP for ``inst``.

    Parameters
    ----------
    variant : {"epsilon", "gap"}
        ``epsilon`` requires ``eps > 0``; ``gap`` ignores ``eps``.
    preprocess : bool
        Fix ``y_act = 0`` and all inflows to zero for enterprises that
        accept no pollutant at the inlet (``c_in == 0``).
    bigm : {"tight", "uniform"}
        ``uniform`` uses the park-wide constant ``K`` in every switched
        row.  ``tight`` uses the smallest per-enterprise constants that
        switch the same rows off: ``M_i/(C_out-C_in)`` bounds any inflow
        or outflow of ``i``, ``M_i/C_out + eps`` the semi-stand-alone row
        and the threshold the profitability row.  Both describe the same
        feasible set; ``tight`` has a much stronger LP relaxation.
    """
    validate_instance(inst)
    if variant not in ("epsilon", "gap"):
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "epsilon" and not eps > 0:
        raise ValueError("variant 'epsilon' requires eps > 0")
    if bigm not in BIGM_MODES:
        raise ValueError(f"unknown big-M mode {bigm!r}")
    margin = eps if variant == "epsilon" else 0.0
    const = derive_constants(inst)
    n = inst.n
    K = effective_bigm(const, margin)
    if bigm == "uniform":
        m_flow = np.full(n, K)
        m_pos = np.full(n, K)
        m_prof = np.full(n, K)
    else:
        m_flow = const.active_water.copy()
        m_pos = const.sa_water + margin
        m_prof = const.threshold.copy()
    p = inst.prices
    A = p.horizon_a
    c_in, c_out = inst.c_in, inst.c_out

    mdl = MipModel(f"eip_{variant}")
    z = np.array([mdl.add_var(f"z_{i + 1}") for i in range(n)], dtype=int)
    d = np.array([mdl.add_var(f"d_{i + 1}") for i in range(n)], dtype=int)
    flux = -np.ones((n, n), dtype=int)
    for k in range(n):
        for i in range(n):
            if k != i:
                flux[k, i] = mdl.add_var(f"F_{k + 1}_{i + 1}")
    y_null = np.empty(n, int)
    y_act = np.empty(n, int)
    y_pos = np.empty(n, int)
    for i in range(n):
        y_null[i] = mdl.add_var(f"ynull_{i + 1}", "binary")
        y_act[i] = mdl.add_var(f"yact_{i + 1}", "binary")
        y_pos[i] = mdl.add_var(f"ypos_{i + 1}", "binary")

    for i in range(n):
        out = [int(flux[i, j]) for j in range(n) if j != i]
        inn = [int(flux[k, i]) for k in range(n) if k != i]
        tag = i + 1
        mdl.add_constr([(z[i], 1.0)] + [(v, 1.0) for v in inn]
                       + [(v, -1.0) for v in out] + [(d[i], -1.0)],
                       "=", 0.0, f"balance_{tag}")
        sa, act = const.sa_water[i], const.active_water[i]
        mdl.add_constr([(d[i], 1.0), (y_act[i], sa - act)] + [(v, 1.0) for v in out],
                       "=", sa, f"discharge_{tag}")
        inlet = [(int(flux[k, i]), c_out[k] - c_in[i]) for k in range(n) if k != i]
        mdl.add_constr(inlet + [(z[i], -c_in[i])], "<=", 0.0, f"inlet_{tag}")
        mf = m_flow[i]
        mdl.add_constr([(v, 1.0) for v in out] + [(y_null[i], mf)], "<=", mf, f"nullout_{tag}")
        mdl.add_constr([(v, 1.0) for v in inn] + [(y_null[i], mf)], "<=", mf, f"nullin_{tag}")
        mdl.add_constr([(v, 1.0) for v in inn] + [(y_act[i], -mf)], "<=", 0.0, f"active_{tag}")
        mdl.add_constr([(v, -1.0) for v in out] + [(y_pos[i], -m_pos[i])], "<=", -sa - margin,
                       f"semistandalone_{tag}")
        mdl.add_constr([(v, 1.0) for v in inn] + [(y_pos[i], -const.threshold[i]),
                                                  (y_act[i], -m_prof[i])],
                       ">=", -m_prof[i], f"profitable_{tag}")
        stc = const.stc[i]
        mdl.add_constr([(z[i], A * p.c), (d[i], A * p.beta)]
                       + [(v, A * p.gamma) for v in inn + out]
                       + [(y_null[i], -(stc - inst.alpha * stc))],
                       "<=", inst.alpha * stc, f"contract_{tag}")
        if preprocess and c_in[i] == 0:
            mdl.set_bounds(int(y_act[i]), ub=0.0)
            for v in inn:
                mdl.set_bounds(v, ub=0.0)
    mdl.set_objective([(int(v), 1.0) for v in d])
    return ReducedProblem(inst, const, variant, margin, K, mdl, z, d, flux,
                          y_null, y_act, y_pos, bigm, m_flow, m_pos, m_prof)


def solve(rp: ReducedProblem, engine: str = "internal", **limits) -> MipSolution:
    """Solve ``rp.model`` with the internal engine or the external adapter."""
    return _solve_model(rp.model, engine, **limits)


def _solve_model(model: MipModel, engine: str, **limits) -> MipSolution:
    limits = {k: v for k, v in limits.items() if v is not None}
    if engine == "internal":
        return solve_mip(model, **limits)
    if engine == "external":
        return solve_external(model, **limits)
    raise ValueError(f"unknown engine {engine!r}")


def extract_operation(rp: ReducedProblem, sol: MipSolution) -> ParkOperation:
    """Turn a solver assignment into a :class:`ParkOperation`.

    Binaries are snapped to {0, 1} and the model's discharge variables are
    checked against the closed-form discharge.  Fluxes below ``FLUX_TOL``
    and flows the boolean profile forbids are zeroed; fresh water is then
    re-derived from the water balance.
    """
    if sol.x is None:
        raise ValueError(f"solution has no assignment (status {sol.status.value})")
    x = sol.x
    n = rp.n
    raw = np.zeros((n, n))
    mask = rp.flux >= 0
    raw[mask] = x[rp.flux[mask]]
    op = ParkOperation(
        z=np.maximum(x[rp.z], 0.0),
        flux=raw,
        y_null=np.round(x[rp.y_null]) > 0.5,
        y_act=np.round(x[rp.y_act]) > 0.5,
        y_pos=np.round(x[rp.y_pos]) > 0.5,
    )
    recomputed = compute_discharge(op, rp.inst)
    model_d = x[rp.d]
    # binaries are integral only up to the solver tolerance; scale by the
    # size of the discharge jump they multiply
    err = np.abs(recomputed - model_d) / np.maximum(1.0, rp.const.active_water)
    if np.max(err) > 1e-6:
        raise ConsistencyError(
            f"discharge mismatch {np.max(err):.3g} between model and formula")
    # Flows the profile forbids survive only as big-M leakage of order
    # M * int_tol; they are dropped and z is re-derived from the balance.
    keep = (raw >= FLUX_TOL) & op.y_act[None, :] & ~op.y_null[:, None] & ~op.y_null[None, :]
    op.flux = np.where(keep, raw, 0.0)
    # the same leakage can leave a sink flux a hair below zero; trim the
    # senders' outflow to exactly what they have
    short = np.minimum(compute_discharge(op, rp.inst), 0.0)
    out = op.outflow
    scale = np.where(out > 0, (out + short) / np.where(out > 0, out, 1.0), 1.0)
    op.flux = op.flux * scale[:, None]
    op.discharge = np.maximum(compute_discharge(op, rp.inst), 0.0)
    op.z = np.maximum(op.discharge + op.outflow - op.inflow, 0.0)
    return op


def extract_network(op: ParkOperation, tol: float = FLUX_TOL) -> set[tuple[int, int]]:
    """Edges ``(i, j)`` with 1-based enterprise ids; ``j == 0`` is the sink.

    All positive exchanges are kept together with every sink edge.  Inlet
    edges of enterprises without inflow and every exchange touching an
    excluded enterprise are removed.
    """
    n = len(op.z)
    inflow = op.flux.sum(axis=0)
    edges = {(i + 1, 0) for i in range(n)}
    for k in range(n):
        for i in range(n):
            if k == i or op.flux[k, i] <= tol:
                continue
            if op.y_null[k] or op.y_null[i] or inflow[i] <= tol:
                continue
            edges.add((k + 1, i + 1))
    return edges


def satisfies_strict(rp: ReducedProblem, sol: MipSolution) -> bool:
    """Whether the assignment meets the strict semi-stand-alone inequality.

    Only rows with ``y_pos = 0`` are binding; a switched-off row holds
    strictly for any large enough constant.  Uses a plain ``< 0``
    comparison, without tolerance.
    """
    x = sol.x
    for i in range(rp.n):
        if round(x[rp.y_pos[i]]) == 1:
            continue
        out = sum(x[rp.flux[i, j]] for j in range(rp.n) if j != i)
        if not rp.const.sa_water[i] - out < 0:
            return False
    return True


def audit(rp: ReducedProblem, sol: MipSolution, rel_tol: float = 1e-5) -> EquilibriumAudit | None:
    """Equilibrium audit of a solver assignment, ``None`` if it is unusable."""
    try:
        op = extract_operation(rp, sol)
        return verify_equilibrium(op, extract_network(op), rp.inst, rel_tol=rel_tol)
    except (ConsistencyError, PhysicalInfeasibility) as exc:
        log.debug("audit rejected assignment: %s", exc)
        return None


def _secondary_objective(rp: ReducedProblem, kind: str):
    n, inst = rp.n, rp.inst
    pairs = [(k, i) for k in range(n) for i in range(n) if k != i]
    c_out, c_in = inst.c_out, inst.c_in
    if kind == "min-load":
        return [(int(rp.flux[k, i]), c_out[k]) for k, i in pairs]
    if kind == "min-inlet-slack":
        return [(int(rp.flux[k, i]), c_out[k] - c_in[i]) for k, i in pairs]
    raise ValueError(f"unknown selection objective {kind!r}")


def _optimal_face(rp: ReducedProblem, z_star: float, kind: str | None = None,
                  bans=()) -> ReducedProblem:
    twin = build(rp.inst, rp.variant, rp.eps if rp.variant == "epsilon" else DEFAULT_EPSILON,
                 bigm=rp.bigm)
    slack = FACE_SLACK * max(1.0, abs(z_star))
    twin.model.add_constr([(int(v), 1.0) for v in twin.d], "<=", z_star + slack, "optimal_face")
    if kind is not None:
        twin.model.set_objective(_secondary_objective(twin, kind))
    for k, i in bans:
        twin.model.set_bounds(int(twin.flux[k, i]), ub=0.0)
    return twin


@dataclass
class Selection:
    """How the returned optimum was picked among alternative optima.

    ``objective`` is ``"primary"`` (first optimum kept), a secondary
    objective name, or ``"edge-bans"``; ``bans`` lists the 1-based inlet
    edges removed from the network in the last case.
    """

    objective: str
    audit: EquilibriumAudit | None
    solves: int = 0
    bans: tuple[tuple[int, int], ...] = ()

    @property
    def is_equilibrium(self) -> bool:
        return self.audit is not None and self.audit.is_equilibrium


def select_equilibrium(rp: ReducedProblem, sol: MipSolution, engine: str = "internal",
                       rel_tol: float = 1e-5, strict: bool = False,
                       max_solves: int = SELECTION_MAX_SOLVES,
                       **limits) -> tuple[ReducedProblem, MipSolution, Selection]:
    """Among the optima of ``rp``, prefer one that passes the equilibrium audit.

    Optimality of the MIP does not by itself stop an enterprise from
    drawing more water from a partner when the only thing forbidding it is
    some third enterprise's contract.  When the first optimum has such a
    deviation the optimal face ``sum(d) <= Z*`` is searched:

    1. the secondary objectives in ``SELECTION_ORDER`` are minimised;
    2. breadth-first over network restrictions: an inlet edge of the
       first deviating enterprise is removed (its flux fixed to zero) and
       any point of the face is taken.

    The search stops at the first assignment that passes or after
    ``max_solves`` MIP solves, returning the first optimum in the latter
    case.  With ``strict`` a candidate must also meet the strict
    semi-stand-alone inequality.
    """
    first = audit(rp, sol, rel_tol)
    sel = Selection("primary", first)
    if first is not None and first.is_equilibrium:
        return rp, sol, sel
    z_star = sol.objective
    sub = dict(limits)
    if engine == "internal":
        sub.setdefault("node_limit", SELECTION_NODE_LIMIT)
        if sub["node_limit"] is None:
            sub["node_limit"] = SELECTION_NODE_LIMIT

    def attempt(kind, bans):
        sel.solves += 1
        twin = _optimal_face(rp, z_star, kind, bans)
        extra = ({"solution_limit": 1, "node_order": "depth"}
                 if kind is None and engine == "internal" else {})
        alt = _solve_model(twin.model, engine, **sub, **extra)
        log.info("face solve %d (%s, bans %s): %s after %d nodes", sel.solves,
                 kind or "any", [(k + 1, i + 1) for k, i in bans], alt.status.value, alt.nodes)
        if alt.x is None:
            return twin, alt, None
        if strict and not satisfies_strict(twin, alt):
            return twin, alt, None
        return twin, alt, audit(twin, alt, rel_tol)

    def accept(twin, alt, res, kind, bans):
        alt.objective = float(np.sum(alt.x[twin.d]))
        alt.bound = sol.bound
        alt.status = sol.status
        sel.objective, sel.audit = kind, res
        sel.bans = tuple((k + 1, i + 1) for k, i in bans)
        return twin, alt, sel

    for kind in SELECTION_ORDER:
        if sel.solves >= max_solves:
            break
        twin, alt, res = attempt(kind, ())
        if res is not None and res.is_equilibrium:
            return accept(twin, alt, res, kind, ())

    def children(twin, alt, res, bans):
        op = extract_operation(twin, alt)
        i = res.failures[0].enterprise - 1
        return [tuple(sorted(bans + ((int(k), i),)))
                for k in np.flatnonzero(op.flux[:, i] > FLUX_TOL)]

    queue = children(rp, sol, first, ()) if first is not None else []
    seen = set(queue)
    while queue and sel.solves < max_solves:
        bans = queue.pop(0)
        twin, alt, res = attempt(None, bans)
        if res is None:
            continue
        if res.is_equilibrium:
            return accept(twin, alt, res, "edge-bans", bans)
        for nb in children(twin, alt, res, bans):
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    log.warning("no optimum passing the equilibrium audit was found in %d solves", sel.solves)
    sel.objective, sel.audit = "primary", first
    return rp, sol, sel


@dataclass
class MethodologyResult:
    gap_problem: ReducedProblem
    gap_solution: MipSolution
    eps_problem: ReducedProblem | None
    eps_solution: MipSolution
    z_bar: float
    z_eps: float
    exact: bool
    selection: Selection | None = None

    @property
    def gap(self) -> float:
        return self.z_eps - self.z_bar

    @property
    def problem(self) -> ReducedProblem:
        return self.eps_problem if self.eps_problem is not None else self.gap_problem

    @property
    def status(self) -> Status:
        return self.eps_solution.status

    def operation(self) -> ParkOperation:
        return extract_operation(self.problem, self.eps_solution)


class SolveFailure(RuntimeError):
    def __init__(self, message: str, solution: MipSolution):
        super().__init__(message)
        self.solution = solution


def solve_methodology(inst: EipInstance, eps: float = DEFAULT_EPSILON,
                      engine: str = "internal", bigm: str = "tight",
                      select: bool = True, rel_tol: float = 1e-5,
                      **limits) -> MethodologyResult:
    """Relaxation first, then the epsilon-tightened problem if needed.

    The relaxed problem is solved; when its answer already satisfies the
    strict inequalities it is exact and is returned for both values.
    Otherwise the epsilon problem is solved and both optimal values are
    reported, the difference being the optimality gap.  A limit hit
    before any incumbent is found gives a result without assignment whose
    ``z_eps`` is NaN and whose ``z_bar`` is the best bound.

    Parameters
    ----------
    select : bool
        Run :func:`select_equilibrium` on the returned optimum (only when
        it is proven optimal).
    limits
        ``node_limit``, ``time_limit``, ``gap_tol``, ``int_tol`` passed to
        the engine.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    rp_gap = build(inst, "gap", bigm=bigm)
    sol_gap = solve(rp_gap, engine, **limits)
    if sol_gap.status is Status.LIMIT and sol_gap.x is None:
        return MethodologyResult(rp_gap, sol_gap, None, sol_gap, sol_gap.bound, math.nan, False)
    if sol_gap.status is Status.INFEASIBLE or sol_gap.x is None:
        raise SolveFailure(
            f"relaxed problem returned {sol_gap.status.value}; the stand-alone profile "
            "is always feasible, so this is a solver failure", sol_gap)
    z_bar = sol_gap.objective if sol_gap.status is Status.OPTIMAL else sol_gap.bound
    if sol_gap.status is Status.OPTIMAL and satisfies_strict(rp_gap, sol_gap):
        rp, sol, sel = rp_gap, sol_gap, None
        if select:
            rp, sol, sel = select_equilibrium(rp_gap, sol_gap, engine, rel_tol, strict=True,
                                              **limits)
        return MethodologyResult(rp, sol, None, sol, z_bar, sol.objective, True, sel)
    rp_eps = build(inst, "epsilon", eps, bigm=bigm)
    sol_eps = solve(rp_eps, engine, **limits)
    if sol_eps.status is Status.LIMIT and sol_eps.x is None:
        return MethodologyResult(rp_gap, sol_gap, rp_eps, sol_eps, z_bar, math.nan, False)
    if sol_eps.x is None:
        raise SolveFailure(
            f"epsilon problem returned {sol_eps.status.value}; the stand-alone profile "
            "is always feasible, so this is a solver failure", sol_eps)
    sel = None
    if select and sol_eps.status is Status.OPTIMAL:
        rp_eps, sol_eps, sel = select_equilibrium(rp_eps, sol_eps, engine, rel_tol, **limits)
    return MethodologyResult(rp_gap, sol_gap, rp_eps, sol_eps, z_bar,
                             sol_eps.objective, False, sel)
