"""Bounded-variable revised simplex on a dense constraint matrix.

The LP is brought to the column form ``A x = b, l <= x <= u`` with one
slack per inequality row and one artificial per row.  Every column has a
finite lower bound: variables with ``lb = -inf`` are negated, and free
variables are split in two.  Rows and structural columns are scaled by
powers of two (geometric-mean scaling) so that big-M rows do not wreck
the conditioning of the basis.

Cold starts use the two-phase primal method (artificials are driven to
zero in phase 1, then fixed at zero).  A warm start from a stored basis
runs the dual simplex when the basis is dual feasible, which is the
common case after tightening bounds in branch-and-bound; anything that
fails falls back to a cold two-phase solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import MipModel, Status

PIVOT_TOL = 1e-9
PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
#: Feasibility and optimality thresholds the final answer must satisfy.
CHECK_PRIMAL = 1e-7
CHECK_DUAL = 1e-9
REFACTOR_EVERY = 50
BLAND_AFTER = 50  # consecutive degenerate pivots before switching to Bland


@dataclass
class LPState:
    """Basis snapshot used to warm-start a later solve."""

    basis: np.ndarray
    at_upper: np.ndarray
    art_sign: np.ndarray


@dataclass
class LPResult:
    status: Status
    x: np.ndarray | None
    objective: float
    dual_bound: float
    iterations: int
    state: LPState | None
    method: str = ""


class _NeedColdStart(Exception):
    pass


class _Singular(_NeedColdStart):
    pass


class StandardLP:
    """Column-form copy of a :class:`MipModel` with binaries relaxed."""

    def __init__(self, model: MipModel):
        c, a, sense, rhs, lb, ub = model.dense()
        self.n_orig = len(c)
        self.lb0, self.ub0 = lb.copy(), ub.copy()
        cols, costs, mapping = [], [], []
        # mapping: (orig index, sign) per column; free vars produce two columns
        for j in range(self.n_orig):
            if np.isfinite(lb[j]):
                mapping.append((j, 1.0))
                cols.append(a[:, j]); costs.append(c[j])
            elif np.isfinite(ub[j]):
                mapping.append((j, -1.0))
                cols.append(-a[:, j]); costs.append(-c[j])
            else:
                mapping.append((j, 1.0)); cols.append(a[:, j]); costs.append(c[j])
                mapping.append((j, -1.0)); cols.append(-a[:, j]); costs.append(-c[j])
        self.mapping = mapping
        self.n_struct = len(mapping)
        m = len(rhs)
        self.m = m
        a_struct = np.column_stack(cols) if cols else np.zeros((m, 0))
        self.row_scale, self.col_scale = _geometric_scaling(a_struct)
        a_struct = self.row_scale[:, None] * a_struct * self.col_scale[None, :]
        cols = list(a_struct.T)
        costs = list(np.array(costs) * self.col_scale)
        slack_rows = [r for r in range(m) if sense[r] != "="]
        for r in slack_rows:
            col = np.zeros(m)
            col[r] = 1.0 if sense[r] == "<=" else -1.0
            cols.append(col); costs.append(0.0)
        self.n_slack = len(slack_rows)
        self.n_cols = self.n_struct + self.n_slack  # artificials appended per solve
        self.A = np.column_stack(cols) if cols else np.zeros((m, 0))
        self.c = np.array(costs, dtype=float)
        self.b = rhs.astype(float) * self.row_scale
        self._a_orig, self._b_orig, self._sense = a, rhs.astype(float), sense
        self._orig_of = np.array([j for j, _ in mapping], dtype=int)
        self._sign_of = np.array([s for _, s in mapping], dtype=float)
        self._free = np.array([not np.isfinite(lb[j]) and not np.isfinite(ub[j])
                               for j, _ in mapping])

    # -- bounds translation ---------------------------------------------------
    def column_bounds(self, lb, ub):
        lo = np.empty(self.n_cols)
        hi = np.empty(self.n_cols)
        for k, (j, s) in enumerate(self.mapping):
            if self._free[k]:
                lo[k], hi[k] = 0.0, math.inf
            elif s > 0:
                lo[k], hi[k] = lb[j], ub[j]
            else:
                lo[k], hi[k] = -ub[j], -lb[j]
        lo[:self.n_struct] /= self.col_scale
        hi[:self.n_struct] /= self.col_scale
        lo[self.n_struct:] = 0.0
        hi[self.n_struct:] = math.inf
        return lo, hi

    def to_original(self, xcols) -> np.ndarray:
        x = np.zeros(self.n_orig)
        np.add.at(x, self._orig_of, self._sign_of * self.col_scale * xcols[:self.n_struct])
        return x

    # -- public entry ---------------------------------------------------------
    def solve(self, lb=None, ub=None, warm: LPState | None = None,
              max_iter: int = 50_000) -> LPResult:
        lb = self.lb0 if lb is None else np.asarray(lb, float)
        ub = self.ub0 if ub is None else np.asarray(ub, float)
        if np.any(lb > ub + PRIMAL_TOL):
            return LPResult(Status.INFEASIBLE, None, math.nan, math.nan, 0, None, "bounds")
        lo, hi = self.column_bounds(lb, ub)
        if warm is not None:
            try:
                res = self._finish(_Simplex.warm(self, lo, hi, warm, max_iter))
                if res.status is not Status.NUMERICAL:
                    return res
            except _NeedColdStart:
                pass
        try:
            return self._finish(_Simplex.cold(self, lo, hi, max_iter))
        except _Singular:
            return LPResult(Status.NUMERICAL, None, math.nan, math.nan, 0, None, "singular")

    def _finish(self, sx: "_Simplex") -> LPResult:
        if sx.status is not Status.OPTIMAL:
            return LPResult(sx.status, None, math.nan, math.nan, sx.iters, None, sx.method)
        xcols = sx.x[:self.n_cols]
        x = self.to_original(xcols)
        obj = float(self.c @ xcols)
        if len(self._b_orig):
            act = self._a_orig @ x
            resid = np.abs(np.where(self._sense == "=", act - self._b_orig,
                                    np.where(self._sense == "<=",
                                             np.maximum(act - self._b_orig, 0.0),
                                             np.maximum(self._b_orig - act, 0.0))))
            scale = np.abs(self._a_orig) @ np.abs(x)
            if np.any(resid > CHECK_PRIMAL + 1e-9 * scale):
                return LPResult(Status.NUMERICAL, None, math.nan, math.nan, sx.iters,
                                None, sx.method)
        return LPResult(Status.OPTIMAL, x, obj, sx.dual_bound(), sx.iters,
                        sx.snapshot(), sx.method)


def _geometric_scaling(a, passes: int = 6):
    """Power-of-two row and column factors from alternating geometric means."""
    m, n = a.shape
    rs, cs = np.ones(m), np.ones(n)
    absa = np.abs(a)
    nz = absa > 0
    for _ in range(passes):
        b = absa * rs[:, None] * cs[None, :]
        big = np.where(nz, b, 0.0).max(axis=1, initial=0.0)
        small = np.where(nz, b, np.inf).min(axis=1, initial=np.inf)
        ok = big > 0
        rs[ok] /= np.sqrt(big[ok] * small[ok])
        b = absa * rs[:, None] * cs[None, :]
        big = np.where(nz, b, 0.0).max(axis=0, initial=0.0)
        small = np.where(nz, b, np.inf).min(axis=0, initial=np.inf)
        ok = big > 0
        cs[ok] /= np.sqrt(big[ok] * small[ok])
    return np.exp2(np.round(np.log2(rs))), np.exp2(np.round(np.log2(cs)))


class _Simplex:
    """One simplex run; holds the working basis and values."""

    def __init__(self, lp: StandardLP, lo, hi, art_sign, max_iter):
        self.lp = lp
        m = lp.m
        self.m = m
        self.art_sign = np.asarray(art_sign, float)
        self.A = np.hstack([lp.A, np.diag(self.art_sign)]) if m else lp.A
        self.b = lp.b
        self.N = self.A.shape[1]
        self.l = np.concatenate([lo, np.zeros(m)])
        self.u = np.concatenate([hi, np.zeros(m)])
        self.cost = np.concatenate([lp.c, np.zeros(m)])
        self.max_iter = max_iter
        self.iters = 0
        self.status = None
        self.method = ""

    # -- construction ---------------------------------------------------------
    @classmethod
    def cold(cls, lp, lo, hi, max_iter):
        m = lp.m
        x_n = lo.copy()
        r = lp.b - lp.A @ x_n if m else np.zeros(0)
        sign = np.where(r >= 0, 1.0, -1.0)
        sx = cls(lp, lo, hi, sign, max_iter)
        sx.method = "primal2"
        sx.basis = np.arange(lp.n_cols, lp.n_cols + m)
        sx.at_upper = np.zeros(sx.N, bool)
        sx.x = np.concatenate([x_n, np.abs(r)])
        sx.Binv = np.diag(sign)
        sx._since_refactor = 0
        sx._mark_basis()
        if m:
            sx.u[lp.n_cols:] = math.inf
            p1 = np.zeros(sx.N)
            p1[lp.n_cols:] = 1.0
            st = sx._primal(p1)
            if st is not Status.OPTIMAL:
                sx.status = Status.NUMERICAL
                return sx
            if p1 @ sx.x > CHECK_PRIMAL:
                sx.status = Status.INFEASIBLE
                return sx
            sx.u[lp.n_cols:] = 0.0
            sx.x[lp.n_cols:] = np.clip(sx.x[lp.n_cols:], 0.0, 0.0)
            sx._drive_out_artificials()
            sx._refactor()
        st = sx._primal(sx.cost)
        sx.status = st
        if st is Status.OPTIMAL:
            sx._polish()
        return sx

    @classmethod
    def warm(cls, lp, lo, hi, state: LPState, max_iter):
        sx = cls(lp, lo, hi, state.art_sign, max_iter)
        sx.basis = state.basis.copy()
        sx.at_upper = state.at_upper.copy()
        sx._mark_basis()
        sx.x = np.zeros(sx.N)
        sx._place_nonbasic()
        sx._refactor()
        d = sx._reduced_costs(sx.cost)
        if sx._dual_infeasibility(d) <= DUAL_TOL:
            sx.method = "dual"
            st = sx._dual()
        elif sx._primal_infeasibility() <= PRIMAL_TOL:
            sx.method = "primal-warm"
            st = sx._primal(sx.cost)
        else:
            raise _NeedColdStart
        if st is Status.INFEASIBLE and sx.method == "dual":
            sx.status = st
            return sx
        if st is not Status.OPTIMAL:
            raise _NeedColdStart
        sx.status = Status.OPTIMAL
        sx._polish()
        if sx.status is not Status.OPTIMAL:
            raise _NeedColdStart
        return sx

    # -- basis bookkeeping ----------------------------------------------------
    def _mark_basis(self):
        self.is_basic = np.zeros(self.N, bool)
        self.is_basic[self.basis] = True
        self.at_upper[self.is_basic] = False

    def _place_nonbasic(self):
        nb = ~self.is_basic
        up = self.at_upper & np.isfinite(self.u)
        self.at_upper = up & nb
        self.x[nb] = np.where(self.at_upper[nb], self.u[nb], self.l[nb])

    def _refactor(self):
        try:
            self.Binv = np.linalg.inv(self.A[:, self.basis])
        except np.linalg.LinAlgError:
            raise _Singular from None
        xn = np.where(self.is_basic, 0.0, self.x)
        self.x[self.basis] = self.Binv @ (self.b - self.A @ xn)
        self._since_refactor = 0

    def _reduced_costs(self, cost):
        y = cost[self.basis] @ self.Binv
        d = cost - y @ self.A
        d[self.basis] = 0.0
        return d

    def _fixed(self):
        return self.u - self.l <= 0.0

    def _dual_infeasibility(self, d):
        free_nb = ~self.is_basic & ~self._fixed()
        lo_bad = np.where(free_nb & ~self.at_upper, -d, 0.0)
        hi_bad = np.where(free_nb & self.at_upper, d, 0.0)
        return float(max(lo_bad.max(initial=0.0), hi_bad.max(initial=0.0)))

    def _primal_infeasibility(self):
        xb = self.x[self.basis]
        lo = self.l[self.basis] - xb
        hi = xb - self.u[self.basis]
        return float(max(lo.max(initial=0.0), hi.max(initial=0.0)))

    def _pivot(self, r, q, col):
        piv = col[r]
        if not abs(piv) > PIVOT_TOL:
            raise _Singular
        row = self.Binv[r] / piv
        self.Binv -= np.outer(col, row)
        self.Binv[r] = row
        leaving = self.basis[r]
        self.basis[r] = q
        self.is_basic[q] = True
        self.is_basic[leaving] = False
        self.at_upper[q] = False
        self._since_refactor += 1
        if self._since_refactor >= REFACTOR_EVERY:
            self._refactor()
        return leaving

    # -- primal simplex -------------------------------------------------------
    def _primal(self, cost) -> Status:
        degenerate = 0
        while True:
            if self.iters >= self.max_iter:
                return Status.LIMIT
            d = self._reduced_costs(cost)
            movable = ~self.is_basic & ~self._fixed()
            cand = movable & (np.where(self.at_upper, d > DUAL_TOL, d < -DUAL_TOL))
            if not cand.any():
                return Status.OPTIMAL
            bland = degenerate >= BLAND_AFTER
            if bland:
                q = int(np.flatnonzero(cand)[0])
            else:
                q = int(np.argmax(np.where(cand, np.abs(d), -1.0)))
            s = -1.0 if self.at_upper[q] else 1.0
            col = self.Binv @ self.A[:, q]
            sc = s * col
            xb = self.x[self.basis]
            lb_b, ub_b = self.l[self.basis], self.u[self.basis]
            t = np.full(self.m, math.inf)
            dec = sc > PIVOT_TOL
            inc = sc < -PIVOT_TOL
            t[dec] = np.maximum(xb[dec] - lb_b[dec], 0.0) / sc[dec]
            fin = inc & np.isfinite(ub_b)
            t[fin] = np.maximum(ub_b[fin] - xb[fin], 0.0) / -sc[fin]
            t_flip = self.u[q] - self.l[q]
            t_min = t.min(initial=math.inf)
            if not np.isfinite(t_min) and not np.isfinite(t_flip):
                return Status.UNBOUNDED
            self.iters += 1
            r = -1
            if np.isfinite(t_min):
                if bland:
                    ties = np.flatnonzero(t <= t_min + 1e-12)
                    r = int(ties[np.argmin(self.basis[ties])])
                else:
                    r = self._harris_primal(sc, xb, lb_b, ub_b, dec, fin)
                    t_min = t[r]
            if t_flip <= t_min:
                self.x[self.basis] -= t_flip * sc
                self.at_upper[q] = not self.at_upper[q]
                self.x[q] = self.u[q] if self.at_upper[q] else self.l[q]
                degenerate = 0
                continue
            degenerate = degenerate + 1 if t_min <= 1e-12 else 0
            to_upper = sc[r] < 0
            self.x[self.basis] -= t_min * sc
            self.x[q] += s * t_min
            p = self._pivot(r, q, col)
            self.at_upper[p] = bool(to_upper)
            self.x[p] = self.u[p] if to_upper else self.l[p]

    @staticmethod
    def _harris_primal(sc, xb, lb_b, ub_b, dec, fin):
        # pass 1: loosened step; pass 2: largest pivot within it
        relaxed = np.full(len(sc), math.inf)
        relaxed[dec] = (xb[dec] - lb_b[dec] + PRIMAL_TOL) / sc[dec]
        relaxed[fin] = (ub_b[fin] - xb[fin] + PRIMAL_TOL) / -sc[fin]
        theta = relaxed.min()
        exact = np.full(len(sc), math.inf)
        exact[dec] = (xb[dec] - lb_b[dec]) / sc[dec]
        exact[fin] = (ub_b[fin] - xb[fin]) / -sc[fin]
        ok = np.flatnonzero(exact <= theta)
        return int(ok[np.argmax(np.abs(sc[ok]))])

    def _drive_out_artificials(self):
        first_art = self.lp.n_cols
        for r in range(self.m):
            if self.basis[r] < first_art:
                continue
            row = self.Binv[r] @ self.A
            row[self.is_basic] = 0.0
            row[first_art:] = 0.0
            row[self._fixed()] = 0.0
            q = int(np.argmax(np.abs(row)))
            if abs(row[q]) <= 1e-7:
                continue  # redundant row: artificial stays basic at zero
            col = self.Binv @ self.A[:, q]
            p = self._pivot(r, q, col)
            self.at_upper[p] = False
            self.x[p] = 0.0
            self._refactor()

    # -- dual simplex ---------------------------------------------------------
    def _dual(self) -> Status:
        d = self._reduced_costs(self.cost)
        stall = 0
        while True:
            if self.iters >= self.max_iter:
                return Status.LIMIT
            xb = self.x[self.basis]
            below = self.l[self.basis] - xb
            above = xb - self.u[self.basis]
            infeas = np.maximum(below, above)
            if infeas.max(initial=0.0) <= PRIMAL_TOL:
                return Status.OPTIMAL
            bland = stall >= BLAND_AFTER
            if bland:
                rows = np.flatnonzero(infeas > PRIMAL_TOL)
                r = int(rows[np.argmin(self.basis[rows])])
            else:
                r = int(np.argmax(infeas))
            to_lower = below[r] > above[r]
            alpha = self.Binv[r] @ self.A
            movable = ~self.is_basic & ~self._fixed()
            if to_lower:
                cand = movable & np.where(self.at_upper, alpha > PIVOT_TOL, alpha < -PIVOT_TOL)
            else:
                cand = movable & np.where(self.at_upper, alpha < -PIVOT_TOL, alpha > PIVOT_TOL)
            if not cand.any():
                return Status.INFEASIBLE
            idx = np.flatnonzero(cand)
            absd = np.abs(d[idx])
            absa = np.abs(alpha[idx])
            ratio = absd / absa
            rmin = ratio.min()
            if bland:
                q = int(idx[ratio <= rmin + 1e-12][0])
            else:
                theta = ((absd + DUAL_TOL) / absa).min()
                ok = ratio <= theta
                q = int(idx[ok][np.argmax(absa[ok])])
            target = self.l[self.basis[r]] if to_lower else self.u[self.basis[r]]
            dx = (xb[r] - target) / alpha[q]
            col = self.Binv @ self.A[:, q]
            if abs(col[r] - alpha[q]) > 1e-7 * (1.0 + abs(alpha[q])):
                # row and column disagree: the inverse has drifted
                if self._since_refactor == 0:
                    raise _Singular
                self._refactor()
                d = self._reduced_costs(self.cost)
                continue
            self.iters += 1
            stall = stall + 1 if rmin <= 1e-12 else 0
            self.x[self.basis] -= dx * col
            self.x[q] += dx
            p = self._pivot(r, q, col)
            self.at_upper[p] = not to_lower
            self.x[p] = target
            if self._since_refactor == 0:
                d = self._reduced_costs(self.cost)
            else:
                dq = d[q]
                d = d - (dq / alpha[q]) * alpha
                d[q] = 0.0
                d[p] = -dq / alpha[q]

    # -- final checks ---------------------------------------------------------
    def _polish(self):
        """Refactor and confirm the basis; repair with a few primal steps."""
        for _ in range(3):
            self._refactor()
            pinf = self._primal_infeasibility()
            dinf = self._dual_infeasibility(self._reduced_costs(self.cost))
            if pinf <= CHECK_PRIMAL and dinf <= CHECK_DUAL:
                self.status = Status.OPTIMAL
                return
            if pinf > CHECK_PRIMAL:
                break
            if self._primal(self.cost) is not Status.OPTIMAL:
                break
        self.status = Status.NUMERICAL

    def dual_bound(self) -> float:
        """Weak-duality lower bound from the final simplex multipliers."""
        y = self.cost[self.basis] @ self.Binv
        d = self.cost - y @ self.A
        d[self.basis] = 0.0
        with np.errstate(invalid="ignore"):
            term = np.where(d > DUAL_TOL, d * self.l,
                            np.where(d < -DUAL_TOL, d * self.u, d * self.x))
        return float(y @ self.b + term.sum())

    def snapshot(self) -> LPState:
        return LPState(self.basis.copy(), self.at_upper.copy(), self.art_sign.copy())


def solve_lp(model: MipModel, lb=None, ub=None) -> LPResult:
    """Solve the continuous relaxation of ``model`` (binaries in [0, 1])."""
    model.validate()
    return StandardLP(model).solve(lb, ub)
