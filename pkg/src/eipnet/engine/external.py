"""Adapter to an external MILP back-end (HiGHS through SciPy)."""

from __future__ import annotations

import math
import time

import numpy as np

from .model import MipModel, MipSolution, Status


class NoBackendError(RuntimeError):
    """No external MILP solver is importable."""


def _backend():
    try:
        from scipy.optimize import Bounds, LinearConstraint, milp
    except ImportError as exc:  # pragma: no cover - scipy is a dependency
        raise NoBackendError("no backend: scipy.optimize.milp is unavailable") from exc
    return milp, LinearConstraint, Bounds


def solve_external(model: MipModel, node_limit: int | None = None,
                   time_limit: float | None = None, gap_tol: float = 1e-6,
                   int_tol: float = 1e-6, solution_limit: int | None = None,
                   **_ignored) -> MipSolution:
    """Solve with HiGHS; variables keep their order, so ``x[j]`` is variable ``j``.

    ``solution_limit`` and ``node_order`` are accepted for interface parity
    and ignored: the SciPy binding exposes no such options.
    """
    milp, LinearConstraint, Bounds = _backend()
    model.validate()
    c, a, sense, rhs, lb, ub = model.dense()
    lo = np.where(sense == "<=", -np.inf, rhs)
    hi = np.where(sense == ">=", np.inf, rhs)
    integrality = np.array([v.kind == "binary" for v in model.variables], dtype=int)
    options = {"mip_rel_gap": gap_tol}
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    if node_limit is not None:
        options["node_limit"] = int(node_limit)
    start = time.perf_counter()
    cons = [LinearConstraint(a, lo, hi)] if len(rhs) else []
    res = milp(c, constraints=cons, integrality=integrality, bounds=Bounds(lb, ub),
               options=options)
    sol = MipSolution(Status.INFEASIBLE, wall_time=time.perf_counter() - start)
    status = {0: Status.OPTIMAL, 1: Status.LIMIT, 2: Status.INFEASIBLE,
              3: Status.UNBOUNDED}.get(res.status, Status.NUMERICAL)
    sol.status = status
    if res.x is not None:
        sol.x = np.asarray(res.x, dtype=float)
        sol.objective = float(res.fun)
    bound = getattr(res, "mip_dual_bound", None)
    sol.bound = float(bound) if bound is not None else (sol.objective if status is Status.OPTIMAL else math.nan)
    sol.nodes = int(getattr(res, "mip_node_count", 0) or 0)
    return sol
