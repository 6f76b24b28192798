"""Linear model container with continuous and binary variables."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    LIMIT = "limit-reached"
    NUMERICAL = "numerical-failure"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = "continuous"  # or "binary"
    lb: float = 0.0
    ub: float = math.inf


@dataclass(frozen=True)
class Constraint:
    name: str
    coefs: tuple[tuple[int, float], ...]
    sense: str  # "<=", "=", ">="
    rhs: float


class MipModel:
    """Minimization model ``min c.x`` over linear rows and variable bounds.

    Variables are referenced by the integer index returned from
    :meth:`add_var`.  Coefficients on the same variable within one row are
    summed.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self._names: dict[str, int] = {}

    # -- building -----------------------------------------------------------
    def add_var(self, name: str, kind: str = "continuous", lb: float = 0.0,
                ub: float = math.inf) -> int:
        if kind not in ("continuous", "binary"):
            raise ValueError(f"unknown variable kind {kind!r}")
        if kind == "binary":
            ub = min(ub, 1.0)
            lb = max(lb, 0.0)
        if name in self._names:
            raise ValueError(f"duplicate variable name {name!r}")
        self._names[name] = len(self.variables)
        self.variables.append(Variable(name, kind, float(lb), float(ub)))
        return len(self.variables) - 1

    def add_constr(self, coefs, sense: str, rhs: float, name: str | None = None) -> int:
        if sense not in ("<=", "=", ">="):
            raise ValueError(f"unknown relation {sense!r}")
        merged: dict[int, float] = {}
        for j, v in coefs:
            if not 0 <= j < len(self.variables):
                raise IndexError(f"constraint references unknown variable {j}")
            merged[j] = merged.get(j, 0.0) + float(v)
        row = tuple((j, v) for j, v in merged.items() if v != 0.0)
        name = name or f"c{len(self.constraints)}"
        self.constraints.append(Constraint(name, row, sense, float(rhs)))
        return len(self.constraints) - 1

    def set_objective(self, coefs) -> None:
        self.objective = {}
        for j, v in coefs:
            self.objective[j] = self.objective.get(j, 0.0) + float(v)

    def set_bounds(self, j: int, lb: float | None = None, ub: float | None = None) -> None:
        v = self.variables[j]
        self.variables[j] = Variable(v.name, v.kind,
                                     v.lb if lb is None else float(lb),
                                     v.ub if ub is None else float(ub))

    def index(self, name: str) -> int:
        return self._names[name]

    # -- views --------------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def binaries(self) -> np.ndarray:
        return np.array([j for j, v in enumerate(self.variables) if v.kind == "binary"],
                        dtype=int)

    def validate(self) -> None:
        for v in self.variables:
            if v.kind == "binary" and not (0.0 <= v.lb and v.ub <= 1.0):
                raise ValueError(f"binary {v.name} has bounds outside [0, 1]")
            if v.lb > v.ub:
                raise ValueError(f"variable {v.name} has lb > ub")
        for c in self.constraints:
            for j, _ in c.coefs:
                if not 0 <= j < self.num_vars:
                    raise ValueError(f"constraint {c.name} references unknown variable {j}")

    def dense(self):
        """Return ``(c, A, sense, rhs, lb, ub)`` as numpy arrays."""
        n, m = self.num_vars, len(self.constraints)
        c = np.zeros(n)
        for j, v in self.objective.items():
            c[j] = v
        a = np.zeros((m, n))
        for r, con in enumerate(self.constraints):
            for j, v in con.coefs:
                a[r, j] += v
        sense = np.array([con.sense for con in self.constraints], dtype=object)
        rhs = np.array([con.rhs for con in self.constraints], dtype=float)
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        return c, a, sense, rhs, lb, ub

    def evaluate(self, x) -> float:
        return float(sum(v * x[j] for j, v in self.objective.items()))

    def max_violation(self, x) -> float:
        """Largest bound or row violation of assignment ``x``."""
        x = np.asarray(x, dtype=float)
        _, a, sense, rhs, lb, ub = self.dense()
        viol = [0.0, float(np.max(lb - x, initial=0.0)), float(np.max(x - ub, initial=0.0))]
        if len(rhs):
            act = a @ x
            le = sense != ">="
            ge = sense != "<="
            viol.append(float(np.max(np.where(le, act - rhs, 0.0), initial=0.0)))
            viol.append(float(np.max(np.where(ge, rhs - act, 0.0), initial=0.0)))
        return max(viol)


@dataclass
class MipSolution:
    status: Status
    x: np.ndarray | None = None
    objective: float = math.nan
    bound: float = math.nan
    nodes: int = 0
    wall_time: float = 0.0
    lp_iterations: int = 0
    bound_trace: list[float] = field(default_factory=list)

    @property
    def has_assignment(self) -> bool:
        return self.x is not None

    def value(self, j: int) -> float:
        return float(self.x[j])
