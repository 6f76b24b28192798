"""Instance data and closed-form quantities of an eco-industrial park.

Units follow the usual water-network conventions: concentrations in ppm,
pollutant loads in g/h, fluxes in T/h, prices in $/T and the horizon in h.
One tonne of water at 1 ppm carries 1 g of pollutant, so no conversion
factors appear anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

#: Absolute tolerance used when comparing fluxes and costs against bounds.
FEAS_TOL = 1e-7


class InstanceError(ValueError):
    """Raised when an instance violates a parameter assumption."""


@dataclass(frozen=True)
class Enterprise:
    id: int
    c_in: float
    c_out: float
    m: float


@dataclass(frozen=True)
class Prices:
    c: float
    beta: float
    gamma: float
    horizon_a: float = 1.0


@dataclass(frozen=True)
class EipInstance:
    enterprises: tuple[Enterprise, ...]
    prices: Prices
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "enterprises", tuple(self.enterprises))

    @property
    def n(self) -> int:
        return len(self.enterprises)

    @property
    def c_in(self) -> np.ndarray:
        return np.array([e.c_in for e in self.enterprises], dtype=float)

    @property
    def c_out(self) -> np.ndarray:
        return np.array([e.c_out for e in self.enterprises], dtype=float)

    @property
    def m(self) -> np.ndarray:
        return np.array([e.m for e in self.enterprises], dtype=float)

    def with_alpha(self, alpha: float) -> "EipInstance":
        return EipInstance(self.enterprises, self.prices, alpha)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]], prices: Prices,
                  alpha: float) -> "EipInstance":
        """Build an instance from ``(c_in, c_out, m)`` rows numbered from 1."""
        ents = tuple(Enterprise(i + 1, float(r[0]), float(r[1]), float(r[2]))
                     for i, r in enumerate(rows))
        return cls(ents, prices, alpha)


@dataclass(frozen=True)
class DerivedConstants:
    stc: np.ndarray
    delta: np.ndarray
    k_bigm: float
    threshold: np.ndarray
    sa_water: np.ndarray
    active_water: np.ndarray


@dataclass
class ParkOperation:
    """Fresh water, inter-enterprise fluxes and the boolean profile.

    ``flux[k, i]`` is the flow sent from enterprise ``k+1`` to enterprise
    ``i+1``; the diagonal is zero.  Sink fluxes live in ``discharge`` and
    are always derived from the other fields.
    """

    z: np.ndarray
    flux: np.ndarray
    y_null: np.ndarray
    y_act: np.ndarray
    y_pos: np.ndarray
    discharge: np.ndarray = field(default=None)

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.flux = np.asarray(self.flux, dtype=float)
        self.y_null = np.asarray(self.y_null, dtype=bool)
        self.y_act = np.asarray(self.y_act, dtype=bool)
        self.y_pos = np.asarray(self.y_pos, dtype=bool)
        if self.discharge is not None:
            self.discharge = np.asarray(self.discharge, dtype=float)

    @property
    def inflow(self) -> np.ndarray:
        return self.flux.sum(axis=0)

    @property
    def outflow(self) -> np.ndarray:
        return self.flux.sum(axis=1)

    @classmethod
    def stand_alone(cls, inst: EipInstance) -> "ParkOperation":
        n = inst.n
        sa = inst.m / inst.c_out
        op = cls(z=sa.copy(), flux=np.zeros((n, n)),
                 y_null=np.ones(n, bool), y_act=np.zeros(n, bool),
                 y_pos=np.ones(n, bool))
        op.discharge = compute_discharge(op, inst)
        return op


def validate_instance(inst: EipInstance) -> EipInstance:
    """Return ``inst`` unchanged if every parameter assumption holds.

    Raises
    ------
    InstanceError
        Naming the first violated invariant, with the enterprise id when
        the violation is per-enterprise.
    """
    if inst.n < 1:
        raise InstanceError("instance needs at least one enterprise")
    ids = [e.id for e in inst.enterprises]
    if ids != list(range(1, inst.n + 1)):
        raise InstanceError(f"enterprise ids must be 1..{inst.n} in order, got {ids}")
    for e in inst.enterprises:
        vals = (e.c_in, e.c_out, e.m)
        if not all(np.isfinite(v) for v in vals):
            raise InstanceError(f"non-finite parameter for enterprise {e.id}")
        if e.c_in < 0:
            raise InstanceError(f"c_in >= 0 violated for enterprise {e.id}")
        if not e.c_in < e.c_out:
            raise InstanceError(f"c_in < c_out violated for enterprise {e.id}")
        if not e.m > 0:
            raise InstanceError(f"m > 0 violated for enterprise {e.id}")
    p = inst.prices
    for name in ("c", "beta", "gamma", "horizon_a"):
        v = getattr(p, name)
        if not (np.isfinite(v) and v > 0):
            raise InstanceError(f"price {name} must be strictly positive, got {v}")
    if not p.c > p.gamma:
        raise InstanceError("c > gamma violated")
    if not 0 < inst.alpha < 1:
        raise InstanceError(f"0 < alpha < 1 violated, got {inst.alpha}")
    return inst


def derive_constants(inst: EipInstance) -> DerivedConstants:
    """Stand-alone costs, discharge jumps, big-M constant and thresholds."""
    p = inst.prices
    m, c_in, c_out = inst.m, inst.c_in, inst.c_out
    sa = m / c_out
    active = m / (c_out - c_in)
    # exact zero when c_in == 0 (both quotients are then identical)
    delta = active - sa
    ratio = (p.c + p.beta) / (p.c - p.gamma)
    return DerivedConstants(
        stc=p.horizon_a * (p.c + p.beta) * sa,
        delta=delta,
        k_bigm=float((inst.n - 1) * sa.sum()),
        threshold=ratio * delta,
        sa_water=sa,
        active_water=active,
    )


def compute_discharge(op: ParkOperation, inst: EipInstance) -> np.ndarray:
    """Sink flux of each enterprise selected by its ``y_act`` flag.

    Negative entries are returned as-is; callers treat them as infeasible.
    """
    m, c_in, c_out = inst.m, inst.c_in, inst.c_out
    base = np.where(op.y_act, m / (c_out - c_in), m / c_out)
    return base - op.outflow


def piecewise_discharge(flux: np.ndarray, inst: EipInstance,
                        tol: float = FEAS_TOL) -> np.ndarray:
    """Sink flux from the physical case split on actual inflow (> ``tol``)."""
    active = np.asarray(flux).sum(axis=0) > tol
    m, c_in, c_out = inst.m, inst.c_in, inst.c_out
    return np.where(active, m / (c_out - c_in), m / c_out) - np.asarray(flux).sum(axis=1)


def enterprise_cost(i: int, op: ParkOperation, inst: EipInstance) -> float:
    """Operating cost [$/h] of enterprise at 0-based position ``i``."""
    p = inst.prices
    discharge = op.discharge if op.discharge is not None else compute_discharge(op, inst)
    shared = op.flux[:, i].sum() + op.flux[i, :].sum()
    return float(p.horizon_a * (p.c * op.z[i] + p.gamma * shared + p.beta * discharge[i]))


def park_costs(op: ParkOperation, inst: EipInstance) -> np.ndarray:
    return np.array([enterprise_cost(i, op, inst) for i in range(inst.n)])


def contract_bound(i: int, y_null_i: bool, inst: EipInstance,
                   const: DerivedConstants | None = None) -> float:
    """Cost ceiling promised to enterprise ``i``: alpha*STC, or STC if excluded."""
    const = const or derive_constants(inst)
    stc = float(const.stc[i])
    return stc if y_null_i else inst.alpha * stc
