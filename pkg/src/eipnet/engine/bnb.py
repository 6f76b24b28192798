"""Best-first branch-and-bound over binary variables."""

from __future__ import annotations

import heapq
import logging
import math
import time

import numpy as np

from .model import MipModel, MipSolution, Status
from .simplex import StandardLP

log = logging.getLogger(__name__)

INT_TOL = 1e-6
GAP_TOL = 1e-6


def _cutoff(incumbent: float, gap_tol: float) -> float:
    if not math.isfinite(incumbent):
        return math.inf
    return incumbent - gap_tol * max(1.0, abs(incumbent))


def solve_mip(model: MipModel, node_limit: int | None = None,
              time_limit: float | None = None, gap_tol: float = GAP_TOL,
              int_tol: float = INT_TOL, heuristic: bool = True,
              solution_limit: int | None = None, node_order: str = "best") -> MipSolution:
    """Solve ``model`` to proven optimality, or until a limit is hit.

    Nodes are expanded in order of their LP bound, ties going to the node
    created first (``node_order="best"``), or depth first with the child
    nearer the LP value first (``"depth"``, which reaches incumbents sooner).  The branching variable is the most fractional binary
    (lowest index on ties).  Children are warm-started from the parent
    basis.  A rounding heuristic is run once per distinct rounded binary
    vector; it only supplies incumbents.

    Parameters
    ----------
    model : MipModel
    node_limit : int, optional
        Maximum number of expanded nodes.
    time_limit : float, optional
        Wall-clock cap in seconds.
    gap_tol : float
        Relative gap (``gap_tol * max(1, |incumbent|)``) at which a node
        is pruned.
    int_tol : float
        Distance from {0, 1} under which a binary counts as integral.
    solution_limit : int, optional
        Stop once this many improving incumbents were found.
    node_order : {"best", "depth"}
        Node selection rule.

    Returns
    -------
    MipSolution
        ``status`` is ``OPTIMAL`` when the search finished, ``LIMIT`` when
        a cap was hit (``x`` then holds the best incumbent, if any).
    """
    if node_order not in ("best", "depth"):
        raise ValueError(f"unknown node order {node_order!r}")
    depth_first = node_order == "depth"
    start = time.perf_counter()
    model.validate()
    lp = StandardLP(model)
    bins = model.binaries
    lb0, ub0 = lp.lb0.copy(), lp.ub0.copy()
    lb0[bins] = np.ceil(lb0[bins] - int_tol)
    ub0[bins] = np.floor(ub0[bins] + int_tol)

    sol = MipSolution(Status.INFEASIBLE)
    root = lp.solve(lb0, ub0)
    sol.lp_iterations += root.iterations
    if root.status is not Status.OPTIMAL:
        sol.status = root.status
        sol.wall_time = time.perf_counter() - start
        return sol

    best_x, best_obj = None, math.inf
    counter = 0
    # entries: (key, tie, bound, depth, lb, ub, lp result)
    heap = [(root.objective, counter, root.objective, 0, lb0, ub0, root)]
    tried: set[bytes] = set()
    bound = root.objective
    hit_limit = False
    numerical = False

    found = 0

    def offer(x, obj):
        nonlocal best_x, best_obj, found
        if obj < best_obj - 1e-12:
            best_x, best_obj = x.copy(), obj
            found += 1

    while heap:
        if not depth_first and heap[0][0] >= _cutoff(best_obj, gap_tol):
            break
        if solution_limit is not None and found >= solution_limit:
            hit_limit = True
            break
        if node_limit is not None and sol.nodes >= node_limit:
            hit_limit = True
            break
        if time_limit is not None and time.perf_counter() - start >= time_limit:
            hit_limit = True
            break
        _, _, node_bound, depth, lb, ub, res = heapq.heappop(heap)
        if node_bound >= _cutoff(best_obj, gap_tol):
            continue
        if not depth_first:
            bound = max(bound, node_bound)
        sol.bound_trace.append(bound)
        sol.nodes += 1
        xb = res.x[bins]
        frac = np.abs(xb - np.round(xb))
        if frac.max(initial=0.0) <= int_tol:
            offer(res.x, res.objective)
            continue
        if heuristic:
            rounded = np.round(xb)
            key = rounded.astype(np.int8).tobytes()
            if key not in tried:
                tried.add(key)
                hl, hu = lb.copy(), ub.copy()
                hl[bins] = np.maximum(hl[bins], rounded)
                hu[bins] = np.minimum(hu[bins], rounded)
                h = lp.solve(hl, hu, warm=res.state)
                sol.lp_iterations += h.iterations
                if h.status is Status.OPTIMAL:
                    offer(h.x, h.objective)
        j = int(bins[np.argmax(frac)])
        order = (0.0, 1.0)
        if depth_first and res.x[j] >= 0.5:
            order = (1.0, 0.0)
        # in depth mode the child pushed last is expanded first
        for v in (order[::-1] if depth_first else order):
            cl, cu = lb.copy(), ub.copy()
            cl[j] = cu[j] = v
            child = lp.solve(cl, cu, warm=res.state)
            sol.lp_iterations += child.iterations
            if child.status is Status.NUMERICAL:
                numerical = True
                log.warning("numerical failure in node LP; optimality can no longer be proven")
                continue
            if child.status is not Status.OPTIMAL:
                continue
            child_bound = max(child.objective, node_bound)
            if child_bound < _cutoff(best_obj, gap_tol):
                counter += 1
                key = -counter if depth_first else child_bound
                heapq.heappush(heap, (key, counter, child_bound, depth + 1, cl, cu, child))

    open_bound = min((e[2] for e in heap), default=math.inf)
    if depth_first:
        bound = open_bound if heap else best_obj
    sol.bound = min(max(bound, open_bound), best_obj)
    sol.wall_time = time.perf_counter() - start
    if best_x is not None:
        sol.x = best_x
        sol.objective = best_obj
    if hit_limit:
        sol.status = Status.LIMIT
    elif numerical:
        sol.status = Status.NUMERICAL
    elif best_x is not None:
        sol.status = Status.OPTIMAL
    else:
        sol.status = Status.INFEASIBLE
    return sol
