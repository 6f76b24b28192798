"""Parameter sweeps and the per-enterprise design report."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import Status
from .equilibrium import EquilibriumAudit
from .model import EipInstance, ParkOperation, derive_constants, park_costs
from .reduction import (
    DEFAULT_EPSILON, MethodologyResult, build, extract_network, extract_operation, solve,
    solve_methodology,
)


@dataclass(frozen=True)
class ReportRow:
    enterprise: int
    sa_water: float
    park_water: float
    sa_cost: float
    park_cost: float
    reduction_pct: float
    excluded: bool


@dataclass
class DesignReport:
    rows: list[ReportRow]
    totals: ReportRow
    z_bar: float
    z_eps: float
    exact: bool
    status: str
    edges: list[tuple[int, int]]
    equilibrium: bool | None
    certificates: list[dict] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.z_eps - self.z_bar

    def to_dict(self) -> dict:
        def row(r):
            return {"enterprise": r.enterprise, "sa_water": r.sa_water,
                    "park_water": r.park_water, "sa_cost": r.sa_cost,
                    "park_cost": r.park_cost, "reduction_pct": r.reduction_pct,
                    "excluded": r.excluded}
        return {
            "status": self.status,
            "z_bar": self.z_bar,
            "z_eps": self.z_eps,
            "gap": self.gap,
            "exact": self.exact,
            "rows": [row(r) for r in self.rows],
            "totals": row(self.totals) | {"enterprise": None, "excluded": None},
            "edges": [list(e) for e in self.edges],
            "equilibrium": self.equilibrium,
            "certificates": self.certificates,
        }

    def to_text(self) -> str:
        """Fixed-width table with every numeral at two decimals."""
        out = io.StringIO()
        head = (f"{'Ent':>4} {'SA water':>10} {'Park water':>11} {'SA cost':>9} "
                f"{'Park cost':>10} {'% red':>7}")
        out.write(head + "\n" + "-" * len(head) + "\n")
        for r in self.rows:
            mark = "*" if r.excluded else " "
            out.write(f"{r.enterprise:>3}{mark} {r.sa_water:10.2f} {r.park_water:11.2f} "
                      f"{r.sa_cost:9.2f} {r.park_cost:10.2f} {r.reduction_pct:7.2f}\n")
        t = self.totals
        out.write("-" * len(head) + "\n")
        out.write(f"{'Tot':>4} {t.sa_water:10.2f} {t.park_water:11.2f} {t.sa_cost:9.2f} "
                  f"{t.park_cost:10.2f} {t.reduction_pct:7.2f}\n\n")
        out.write("* excluded (stand-alone)\n")
        out.write(f"status: {self.status}\n")
        out.write(f"Z_bar = {self.z_bar:.2f}\nZ_eps = {self.z_eps:.2f}\n"
                  f"gap = {self.gap:.2f}\nexact: {'yes' if self.exact else 'no'}\n")
        if self.equilibrium is not None:
            out.write(f"equilibrium: {'verified' if self.equilibrium else 'NOT verified'}\n")
        links = [f"{k}->{i}" for k, i in self.edges if i != 0]
        out.write("exchanges: " + (", ".join(links) if links else "none") + "\n")
        return out.getvalue()


def build_report(inst: EipInstance, op: ParkOperation, result: MethodologyResult | None = None,
                 certificates: EquilibriumAudit | None = None,
                 edges=None) -> DesignReport:
    """Per-enterprise water and cost comparison against stand-alone operation."""
    const = derive_constants(inst)
    costs = park_costs(op, inst)
    rows = []
    for i in range(inst.n):
        red = 0.0 if op.y_null[i] else 100.0 * (1.0 - costs[i] / const.stc[i])
        rows.append(ReportRow(i + 1, float(const.sa_water[i]), float(op.z[i]),
                              float(const.stc[i]), float(costs[i]), float(red),
                              bool(op.y_null[i])))
    tot_stc = float(const.stc.sum())
    tot_cost = float(costs.sum())
    totals = ReportRow(0, float(const.sa_water.sum()), float(op.z.sum()), tot_stc, tot_cost,
                       100.0 * (1.0 - tot_cost / tot_stc), False)
    if edges is None:
        edges = extract_network(op)
    if result is not None:
        z_bar, z_eps, exact, status = result.z_bar, result.z_eps, result.exact, result.status.value
    else:
        z = float(op.discharge.sum()) if op.discharge is not None else float(op.z.sum())
        z_bar = z_eps = z
        exact, status = True, "given"
    return DesignReport(
        rows=rows, totals=totals, z_bar=float(z_bar), z_eps=float(z_eps), exact=exact,
        status=status, edges=sorted(edges),
        equilibrium=None if certificates is None else certificates.is_equilibrium,
        certificates=[] if certificates is None else [c.to_dict() for c in certificates],
    )


@dataclass(frozen=True)
class SweepPoint:
    value: float
    z: float
    stand_alone: int
    total_cost: float
    z_bar: float
    z_eps: float
    solve_time: float
    nodes: int
    status: str
    equilibrium: bool | None = None

    @property
    def gap(self) -> float:
        return self.z_eps - self.z_bar


@dataclass
class SweepResult:
    parameter: str  # "alpha" or "epsilon"
    points: list[SweepPoint]

    COLUMNS = ("z", "stand_alone", "total_cost", "z_bar", "z_eps", "gap",
               "solve_time", "nodes", "status", "equilibrium")

    @property
    def grid(self) -> np.ndarray:
        return np.array([p.value for p in self.points])

    @property
    def z(self) -> np.ndarray:
        return np.array([p.z for p in self.points])

    def to_csv(self, stream=None) -> str:
        """CSV with the parameter first, full-precision numerals."""
        buf = stream if stream is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow((self.parameter,) + self.COLUMNS)
        for p in self.points:
            w.writerow([repr(p.value), repr(p.z), p.stand_alone, repr(p.total_cost),
                        repr(p.z_bar), repr(p.z_eps), repr(p.gap), f"{p.solve_time:.3f}",
                        p.nodes, p.status, "" if p.equilibrium is None else int(p.equilibrium)])
        return buf.getvalue() if stream is None else ""


def make_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive grid ``lo, lo+step, ...`` rounded to the step's decimals."""
    if not step > 0 or hi < lo:
        raise ValueError("need step > 0 and max >= min")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    digits = max(0, -int(math.floor(math.log10(step))) + 2)
    return np.round(lo + step * np.arange(count), digits)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return grid


def _alpha_point(args) -> SweepPoint:
    inst, alpha, eps, engine, verify, limits = args
    sub = inst.with_alpha(float(alpha))
    t0 = time.perf_counter()
    res = solve_methodology(sub, eps, engine, select=verify, **limits)
    elapsed = time.perf_counter() - t0
    nodes = res.gap_solution.nodes + (res.eps_solution.nodes if res.eps_problem else 0)
    if res.eps_solution.x is None:
        return SweepPoint(float(alpha), math.nan, -1, math.nan, res.z_bar, math.nan,
                          elapsed, nodes, res.status.value)
    op = res.operation()
    eq = res.selection.is_equilibrium if (verify and res.selection is not None) else None
    return SweepPoint(float(alpha), float(op.discharge.sum()), int(op.y_null.sum()),
                      float(park_costs(op, sub).sum()), float(res.z_bar), float(res.z_eps),
                      elapsed, nodes, res.status.value, eq)


def alpha_sweep(inst: EipInstance, alpha_grid, eps: float = DEFAULT_EPSILON,
                engine: str = "internal", workers: int = 1, verify: bool = True,
                **limits) -> SweepResult:
    """Solve the design problem at every contract coefficient of the grid.

    Points are independent; with ``workers > 1`` they run in separate
    processes and are returned in grid order.
    """
    grid = _check_grid(alpha_grid)
    if np.any((grid <= 0) | (grid >= 1)):
        raise ValueError("alpha values must lie in (0, 1)")
    tasks = [(inst, a, eps, engine, verify, limits) for a in grid]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_alpha_point, tasks))
    else:
        points = [_alpha_point(t) for t in tasks]
    return SweepResult("alpha", points)


class MonotonicityError(RuntimeError):
    """Z_eps decreased along an increasing epsilon grid."""


def epsilon_sweep(inst: EipInstance, eps_grid, engine: str = "internal",
                  rel_tol: float = 1e-6, **limits) -> SweepResult:
    """Optimal value of the epsilon problem for every margin of the grid.

    The relaxation is solved once and shared.  Raises
    :class:`MonotonicityError` if some value drops below its predecessor by
    more than ``rel_tol`` relative.
    """
    grid = _check_grid(eps_grid)
    if np.any(grid <= 0):
        raise ValueError("epsilon values must be positive")
    rp_gap = build(inst, "gap")
    sol_gap = solve(rp_gap, engine, **limits)
    z_bar = sol_gap.objective if sol_gap.status is Status.OPTIMAL else sol_gap.bound
    points = []
    for eps in grid:
        rp = build(inst, "epsilon", float(eps))
        t0 = time.perf_counter()
        sol = solve(rp, engine, **limits)
        elapsed = time.perf_counter() - t0
        if sol.x is None:
            points.append(SweepPoint(float(eps), math.nan, -1, math.nan, float(z_bar),
                                     math.nan, elapsed, sol.nodes, sol.status.value))
            continue
        op = extract_operation(rp, sol)
        points.append(SweepPoint(float(eps), float(sol.objective), int(op.y_null.sum()),
                                 float(park_costs(op, inst).sum()), float(z_bar),
                                 float(sol.objective), elapsed, sol.nodes, sol.status.value))
    vals = [p.z_eps for p in points if not math.isnan(p.z_eps)]
    for a, b in zip(vals, vals[1:]):
        if b < a - rel_tol * max(1.0, abs(a)):
            raise MonotonicityError(f"Z_eps dropped from {a!r} to {b!r}")
    return SweepResult("epsilon", points)
