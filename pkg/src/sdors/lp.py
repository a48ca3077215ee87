"""Bounded-variable revised simplex.

Rows are handled through logical variables: every row ``i`` gets a variable
``r_i = a_i x`` whose bounds are the row bounds, so the working system is
``A x - r = 0`` with box constraints on every variable.  Cold solves use a
primal simplex with a composite phase 1; warm solves (after bound changes or
appended rows) start with a dual simplex when the basis is dual feasible.

The basis inverse is kept explicitly and updated with rank-one eta steps,
with periodic refactorisation.  Rows are scaled by their largest absolute
coefficient internally; duals are reported in the caller's scaling.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIVOT_TOL = 1e-10
RATIO_PIVOT_TOL = 1e-9
DENSE_COLUMN_LIMIT = 2000
BLAND_AFTER = 1000
DEGENERATE_STEP = 1e-9  # relative dual-objective gain treated as no progress
REFACTOR_EVERY = 64

BASIC, AT_LOWER, AT_UPPER, AT_ZERO = 0, 1, 2, 3

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
CUTOFF = "cutoff"


class SimplexError(RuntimeError):
    """Numerical breakdown (repeated tiny pivots, iteration cap, singular refactor)."""


@dataclass
class LpModel:
    """``min c x  s.t.  row_lower <= A x <= row_upper,  col_lower <= x <= col_upper``."""

    c: np.ndarray
    A: np.ndarray | sp.spmatrix
    row_lower: np.ndarray
    row_upper: np.ndarray
    col_lower: np.ndarray
    col_upper: np.ndarray

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        if sp.issparse(self.A):
            self.A = sp.csr_matrix(self.A, dtype=float)
        else:
            self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        m = self.A.shape[0]
        self.row_lower = np.broadcast_to(np.asarray(self.row_lower, dtype=float), (m,)).copy()
        self.row_upper = np.broadcast_to(np.asarray(self.row_upper, dtype=float), (m,)).copy()
        self.col_lower = np.broadcast_to(np.asarray(self.col_lower, dtype=float), (n,)).copy()
        self.col_upper = np.broadcast_to(np.asarray(self.col_upper, dtype=float), (n,)).copy()
        if self.A.shape[1] != n:
            raise ValueError("A has %d columns, c has %d" % (self.A.shape[1], n))

    @property
    def n_cols(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @classmethod
    def from_constraints(cls, c, A, senses, rhs, lb=0.0, ub=np.inf) -> "LpModel":
        """Build from ``sense`` in {'<=', '>=', '='} rows."""
        rhs = np.asarray(rhs, dtype=float)
        lo = np.full(rhs.size, -np.inf)
        hi = np.full(rhs.size, np.inf)
        for i, s in enumerate(senses):
            if s in ("<=", "L"):
                hi[i] = rhs[i]
            elif s in (">=", "G"):
                lo[i] = rhs[i]
            elif s in ("=", "==", "E"):
                lo[i] = hi[i] = rhs[i]
            else:
                raise ValueError("unknown sense %r" % (s,))
        c = np.asarray(c, dtype=float)
        if A is None or (not sp.issparse(A) and np.size(A) == 0):
            A = np.zeros((rhs.size, c.size))
        return cls(c, A, lo, hi, np.broadcast_to(lb, c.shape), np.broadcast_to(ub, c.shape))


@dataclass(frozen=True)
class Basis:
    """Status of every variable (structurals then logicals) at a vertex."""

    n_cols: int
    status: tuple[int, ...]

    @property
    def n_rows(self) -> int:
        return len(self.status) - self.n_cols


@dataclass
class LpSolution:
    status: str
    x: np.ndarray
    objective: float
    duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int
    basis: Basis | None = None
    row_activity: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _row_scale(A) -> np.ndarray:
    if sp.issparse(A):
        mx = abs(A).max(axis=1).toarray().ravel() if A.shape[0] else np.zeros(0)
    else:
        mx = np.abs(A).max(axis=1) if A.size else np.zeros(A.shape[0])
    mx = np.asarray(mx, dtype=float)
    return np.where(mx > 0, 1.0 / np.where(mx > 0, mx, 1.0), 1.0)


class SimplexSolver:
    """Reusable simplex context.

    Supports bound changes, appended rows and removal of rows whose logical
    is basic, each followed by a warm re-solve from the current basis.
    """

    def __init__(self, model: LpModel, basis: Basis | None = None):
        n, m = model.n_cols, model.n_rows
        self.n = n
        self._dense = n <= DENSE_COLUMN_LIMIT
        scale = _row_scale(model.A)
        if sp.issparse(model.A):
            As = sp.diags(scale) @ model.A
            self.A = As.toarray() if self._dense else sp.csc_matrix(As)
        else:
            As = model.A * scale[:, None]
            self.A = As if self._dense else sp.csc_matrix(As)
        self.scale = scale
        self.cost = np.concatenate([model.c, np.zeros(m)])
        self.lo = np.concatenate([model.col_lower, model.row_lower * scale])
        self.hi = np.concatenate([model.col_upper, model.row_upper * scale])
        self.iterations = 0
        self._has_basis = False
        if basis is not None:
            try:
                self.set_basis(basis)
            except (SimplexError, ValueError):
                self._slack_basis()
        else:
            self._slack_basis()

    # ------------------------------------------------------------------ setup
    @property
    def m(self) -> int:
        return self.A.shape[0]

    def _default_status(self, j: int) -> int:
        if np.isfinite(self.lo[j]):
            return AT_LOWER
        if np.isfinite(self.hi[j]):
            return AT_UPPER
        return AT_ZERO

    def _nonbasic_value(self, j: int) -> float:
        s = self.status[j]
        if s == AT_LOWER:
            return self.lo[j]
        if s == AT_UPPER:
            return self.hi[j]
        return 0.0

    def _slack_basis(self) -> None:
        n, m = self.n, self.m
        self.status = np.empty(n + m, dtype=np.int8)
        for j in range(n):
            self.status[j] = self._default_status(j)
        self.status[n:] = BASIC
        self.head = np.arange(n, n + m)
        self.x = np.zeros(n + m)
        for j in range(n):
            self.x[j] = self._nonbasic_value(j)
        self.Binv = -np.eye(m)
        self._updates = 0
        self._recompute_xB()
        self._has_basis = True

    def set_basis(self, basis: Basis) -> None:
        """Install a stored basis; rows appended since it was taken get basic logicals."""
        n, m = self.n, self.m
        if basis.n_cols != n:
            raise ValueError("basis column count mismatch")
        st = np.asarray(basis.status, dtype=np.int8).copy()
        m_old = st.size - n
        if m_old > m:
            raise ValueError("basis has more rows than the model")
        status = np.concatenate([st, np.full(m - m_old, BASIC, dtype=np.int8)])
        head = np.flatnonzero(status == BASIC)
        if head.size != m:
            raise ValueError("basis size mismatch")
        for j in np.flatnonzero(status != BASIC):
            s = status[j]
            if (s == AT_LOWER and not np.isfinite(self.lo[j])) or (
                s == AT_UPPER and not np.isfinite(self.hi[j])
            ):
                status[j] = self._default_status(j)
        same = self._has_basis and np.array_equal(status == BASIC, self.status == BASIC)
        self.status = status
        if not same:
            self.head = head
        self._set_nonbasic_values()
        if not same:
            self._refactor()
        self._recompute_xB()
        self._has_basis = True

    def _set_nonbasic_values(self) -> None:
        st = self.status
        self.x = np.where(st == AT_LOWER, self.lo, np.where(st == AT_UPPER, self.hi, 0.0))
        self.x[st == BASIC] = 0.0

    def basis(self) -> Basis:
        return Basis(self.n, tuple(int(s) for s in self.status))

    # --------------------------------------------------------------- algebra
    def _column(self, j: int) -> np.ndarray:
        if j < self.n:
            if self._dense:
                return self.A[:, j]
            return self.A[:, j].toarray().ravel()
        e = np.zeros(self.m)
        e[j - self.n] = -1.0
        return e

    def _basis_matrix(self) -> np.ndarray:
        m = self.m
        Bm = np.zeros((m, m))
        struct = self.head < self.n
        ks = np.flatnonzero(struct)
        if ks.size:
            cols = self.head[ks]
            if self._dense:
                Bm[:, ks] = self.A[:, cols]
            else:
                Bm[:, ks] = self.A[:, cols].toarray()
        kl = np.flatnonzero(~struct)
        Bm[self.head[kl] - self.n, kl] = -1.0
        return Bm

    def _refactor(self) -> None:
        m = self.m
        if m == 0:
            self.Binv = np.zeros((0, 0))
            self._updates = 0
            return
        Bm = self._basis_matrix()
        try:
            Binv = np.linalg.inv(Bm)
        except np.linalg.LinAlgError as exc:
            raise SimplexError("singular basis") from exc
        if not np.all(np.isfinite(Binv)) or np.abs(Bm @ Binv - np.eye(m)).max() > 1e-6:
            raise SimplexError("ill-conditioned basis")
        self.Binv = Binv
        self._updates = 0

    def _A_dot(self, xs: np.ndarray) -> np.ndarray:
        return np.asarray(self.A @ xs).ravel()

    def _AT_dot(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(self.A.T @ y).ravel()

    def _recompute_xB(self) -> None:
        n = self.n
        xs = self.x.copy()
        xs[self.head] = 0.0
        v = self._A_dot(xs[:n]) - xs[n:]
        self.x[self.head] = -(self.Binv @ v)

    def _reduced_costs(self, cB: np.ndarray, cN: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = cB @ self.Binv
        d = np.empty(self.n + self.m)
        d[: self.n] = cN[: self.n] - self._AT_dot(y)
        d[self.n :] = cN[self.n :] + y
        d[self.head] = 0.0
        return y, d

    def _pivot(self, r: int, q: int, alpha: np.ndarray) -> None:
        ar = alpha[r]
        row = self.Binv[r] / ar
        self.Binv -= np.outer(alpha, row)
        self.Binv[r] = row
        self.head[r] = q
        self.status[q] = BASIC
        self._updates += 1

    # --------------------------------------------------------- modification
    def set_col_bounds(self, j: int, lo: float, hi: float) -> None:
        self.lo[j] = lo
        self.hi[j] = hi
        if self.status[j] != BASIC:
            s = self.status[j]
            if s == AT_LOWER and not np.isfinite(lo):
                self.status[j] = self._default_status(j)
            elif s == AT_UPPER and not np.isfinite(hi):
                self.status[j] = self._default_status(j)
            elif s == AT_ZERO and (np.isfinite(lo) or np.isfinite(hi)):
                self.status[j] = self._default_status(j)
            self.x[j] = self._nonbasic_value(j)

    def set_all_col_bounds(self, lo: np.ndarray, hi: np.ndarray) -> None:
        changed = np.flatnonzero((self.lo[: self.n] != lo) | (self.hi[: self.n] != hi))
        for j in changed:
            self.set_col_bounds(int(j), float(lo[j]), float(hi[j]))

    def add_rows(self, rows, lower, upper) -> np.ndarray:
        """Append rows (dense ``k x n`` array or sparse); the new logicals enter the basis."""
        if sp.issparse(rows):
            R = sp.csr_matrix(rows, dtype=float)
            scale = _row_scale(R)
            Rs = sp.diags(scale) @ R
            Rd = Rs.toarray()
        else:
            R = np.atleast_2d(np.asarray(rows, dtype=float))
            scale = _row_scale(R)
            Rd = R * scale[:, None]
        k = Rd.shape[0]
        if k == 0:
            return np.zeros(0, dtype=int)
        n, m = self.n, self.m
        lower = np.broadcast_to(np.asarray(lower, dtype=float), (k,)) * scale
        upper = np.broadcast_to(np.asarray(upper, dtype=float), (k,)) * scale
        if self._dense:
            self.A = np.vstack([self.A, Rd])
        else:
            self.A = sp.csc_matrix(sp.vstack([self.A, sp.csr_matrix(Rd)]))
        self.scale = np.concatenate([self.scale, scale])
        self.cost = np.concatenate([self.cost, np.zeros(k)])
        self.lo = np.concatenate([self.lo, lower])
        self.hi = np.concatenate([self.hi, upper])
        self.status = np.concatenate([self.status, np.full(k, BASIC, dtype=np.int8)])
        newvars = np.arange(n + m, n + m + k)
        aB = np.zeros((k, m))
        struct = self.head < n
        aB[:, struct] = Rd[:, self.head[struct]]
        Binv = np.zeros((m + k, m + k))
        Binv[:m, :m] = self.Binv
        Binv[m:, :m] = aB @ self.Binv
        Binv[m:, m:] = -np.eye(k)
        self.Binv = Binv
        self.head = np.concatenate([self.head, newvars])
        self.x = np.concatenate([self.x, np.zeros(k)])
        self.x[newvars] = Rd @ self.x[:n]
        return np.arange(m, m + k)

    def remove_rows(self, rows) -> None:
        """Drop rows whose logical variable is basic.  Refactorises."""
        rows = np.unique(np.asarray(rows, dtype=int))
        if rows.size == 0:
            return
        n, m = self.n, self.m
        logical = n + rows
        if np.any(self.status[logical] != BASIC):
            raise ValueError("can only remove rows with basic logicals")
        keep_rows = np.setdiff1d(np.arange(m), rows)
        keep_vars = np.concatenate([np.arange(n), n + keep_rows])
        remap = -np.ones(n + m, dtype=int)
        remap[keep_vars] = np.arange(keep_vars.size)
        self.A = self.A[keep_rows] if self._dense else sp.csc_matrix(self.A[keep_rows])
        self.scale = self.scale[keep_rows]
        self.cost = self.cost[keep_vars]
        self.lo = self.lo[keep_vars]
        self.hi = self.hi[keep_vars]
        self.status = self.status[keep_vars]
        self.x = self.x[keep_vars]
        head = self.head[~np.isin(self.head, logical)]
        self.head = remap[head]
        self._refactor()
        self._recompute_xB()

    # ---------------------------------------------------------------- solve
    def solve(self, max_iter: int | None = None, cutoff: float = np.inf) -> LpSolution:
        """Solve from the current basis.

        ``cutoff``: stop early with status ``cutoff`` once the dual simplex
        proves the objective is at least this value.
        """
        n, m = self.n, self.m
        if max_iter is None:
            max_iter = 50_000 + 50 * (n + m)
        if np.any(self.lo > self.hi + FEAS_TOL):
            return self._result(INFEASIBLE)
        start_iter = self.iterations
        try:
            self._refactor_if_needed()
        except SimplexError:
            self._slack_basis()
        # bound changes move nonbasic values; basic values must follow
        self._recompute_xB()
        if self._place_for_dual():
            status = self._dual(start_iter + max_iter, cutoff)
            if status in (CUTOFF, INFEASIBLE):
                return self._result(status)
            if status == OPTIMAL and self._verify():
                return self._result(status)
        for _ in range(3):
            status = self._primal(self.iterations + max_iter)
            if status != OPTIMAL or self._verify():
                return self._result(status)
        raise SimplexError("could not reach a verified optimal basis")

    def _refactor_if_needed(self, force: bool = False) -> None:
        if force or self._updates >= REFACTOR_EVERY:
            self._refactor()
            self._recompute_xB()

    def _residual(self) -> float:
        n = self.n
        r = self._A_dot(self.x[:n]) - self.x[n:]
        return float(np.max(np.abs(r), initial=0.0)) / (1.0 + float(np.max(np.abs(self.x), initial=0.0)))

    def _verify(self) -> bool:
        """Check primal and dual feasibility of the final basis, refactoring if the inverse drifted."""
        self._recompute_xB()
        if self._updates > 0 and self._residual() > 1e-9:
            try:
                self._refactor()
            except SimplexError:
                self._slack_basis()
                return False
            self._recompute_xB()
        xB = self.x[self.head]
        if np.any(xB < self.lo[self.head] - FEAS_TOL) or np.any(xB > self.hi[self.head] + FEAS_TOL):
            return False
        _, d = self._reduced_costs(self.cost[self.head], self.cost)
        return not self._dual_violations(d).any()

    def _dual_violations(self, d: np.ndarray) -> np.ndarray:
        st = self.status
        movable = self.hi > self.lo
        bad_lo = ((st == AT_LOWER) | (st == AT_ZERO)) & (d < -OPT_TOL) & movable
        bad_hi = ((st == AT_UPPER) | (st == AT_ZERO)) & (d > OPT_TOL) & movable
        return bad_lo | bad_hi

    def _place_for_dual(self) -> bool:
        """Move boxed nonbasics to the bound matching their reduced-cost sign.

        Returns False when the basis cannot be made dual feasible.
        """
        _, d = self._reduced_costs(self.cost[self.head], self.cost)
        bad = np.flatnonzero(self._dual_violations(d))
        if bad.size == 0:
            return True
        to_upper = d[bad] < 0
        bound = np.where(to_upper, self.hi[bad], self.lo[bad])
        if not np.all(np.isfinite(bound)):
            return False
        self.status[bad] = np.where(to_upper, AT_UPPER, AT_LOWER)
        self.x[bad] = bound
        self._recompute_xB()
        return True

    def _dual(self, iter_cap: int, cutoff: float) -> str | None:
        n = self.n
        stall = 0
        degenerate = 0
        best = float(self.cost @ self.x)
        while True:
            if self.iterations >= iter_cap:
                return None
            if self._updates >= REFACTOR_EVERY:
                try:
                    self._refactor_if_needed(force=True)
                except SimplexError:
                    return None
                if not self._place_for_dual():
                    return None
            head = self.head
            cB = self.cost[head]
            _, d = self._reduced_costs(cB, self.cost)
            if self._dual_violations(d).any():
                if not self._place_for_dual():
                    return None
                _, d = self._reduced_costs(cB, self.cost)
            xB = self.x[head]
            lo_B, hi_B = self.lo[head], self.hi[head]
            infeas = np.maximum(lo_B - xB, xB - hi_B)
            r = int(np.argmax(infeas)) if infeas.size else 0
            if infeas.size == 0 or infeas[r] <= FEAS_TOL:
                return OPTIMAL
            if degenerate >= BLAND_AFTER:
                return None  # stalled; the primal pass has the anti-cycling rule
            if np.isfinite(cutoff):
                obj = float(self.cost @ self.x)
                if obj >= cutoff:
                    return CUTOFF
            s = 1.0 if xB[r] < lo_B[r] else -1.0
            target = lo_B[r] if s > 0 else hi_B[r]
            rho = self.Binv[r]
            arow = np.empty(n + self.m)
            arow[:n] = self._AT_dot(rho)
            arow[n:] = -rho
            arow[head] = 0.0
            st = self.status
            movable = self.hi > self.lo
            sa = s * arow
            big = np.abs(arow) > RATIO_PIVOT_TOL
            elig = movable & big & (st != BASIC) & (
                ((st == AT_LOWER) & (sa < 0)) | ((st == AT_UPPER) & (sa > 0)) | (st == AT_ZERO)
            )
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                return INFEASIBLE
            absd = np.abs(d[cand])
            absa = np.abs(arow[cand])
            tmax = np.min((absd + OPT_TOL) / absa)
            ratio = absd / absa
            pick = cand[ratio <= tmax]
            q = int(pick[np.argmax(np.abs(arow[pick]))])
            step = float(ratio.min()) * abs(xB[r] - target)
            degenerate = degenerate + 1 if step <= DEGENERATE_STEP * (1.0 + abs(best)) else 0
            alpha = self.Binv @ self._column(q)
            if abs(alpha[r]) < PIVOT_TOL or abs(alpha[r] - arow[q]) > 1e-6 * (1.0 + abs(arow[q])):
                stall += 1
                if stall > 5:
                    raise SimplexError("repeated tiny pivots in dual simplex")
                self._refactor_if_needed(force=True)
                continue
            stall = 0
            delta = (xB[r] - target) / alpha[r]
            leaving = int(head[r])
            self.x[q] += delta
            self.x[head] -= delta * alpha
            self.x[leaving] = target
            self.status[leaving] = AT_LOWER if s > 0 else AT_UPPER
            self._pivot(r, q, alpha)
            self.iterations += 1

    def _primal(self, iter_cap: int) -> str:
        n = self.n
        degenerate = 0
        stall = 0
        while True:
            if self.iterations >= iter_cap:
                raise SimplexError("iteration limit reached")
            if self._updates >= REFACTOR_EVERY:
                self._refactor_if_needed(force=True)
            head = self.head
            xB = self.x[head]
            lo_B, hi_B = self.lo[head], self.hi[head]
            below = xB < lo_B - FEAS_TOL
            above = xB > hi_B + FEAS_TOL
            phase1 = bool(below.any() or above.any())
            if phase1:
                cB = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                cN = np.zeros(n + self.m)
            else:
                cB = self.cost[head]
                cN = self.cost
            _, d = self._reduced_costs(cB, cN)
            viol = self._dual_violations(d)
            cand = np.flatnonzero(viol)
            if cand.size == 0:
                return INFEASIBLE if phase1 else OPTIMAL
            bland = degenerate >= BLAND_AFTER
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[q] < 0 else -1.0
            alpha = self.Binv @ self._column(q)
            rate = -direction * alpha
            flip = self.hi[q] - self.lo[q]
            t, r, to_upper = self._primal_ratio(xB, lo_B, hi_B, below, above, rate, phase1, bland)
            if r < 0 and not np.isfinite(flip):
                if phase1:
                    raise SimplexError("phase 1 ray")
                return UNBOUNDED
            if r < 0 or flip <= t:
                # bound flip
                t = flip
                self.x[q] += direction * t
                self.x[head] += rate * t
                self.status[q] = AT_UPPER if direction > 0 else AT_LOWER
                self.x[q] = self._nonbasic_value(q)
                self.iterations += 1
                degenerate = 0
                continue
            if abs(alpha[r]) < PIVOT_TOL:
                stall += 1
                if stall > 5:
                    raise SimplexError("repeated tiny pivots in primal simplex")
                self._refactor_if_needed(force=True)
                continue
            stall = 0
            leaving = int(head[r])
            self.x[q] += direction * t
            self.x[head] += rate * t
            self.x[leaving] = self.hi[leaving] if to_upper else self.lo[leaving]
            self.status[leaving] = AT_UPPER if to_upper else AT_LOWER
            self._pivot(r, q, alpha)
            self.iterations += 1
            degenerate = degenerate + 1 if t <= 1e-12 else 0

    @staticmethod
    def _primal_ratio(xB, lo_B, hi_B, below, above, rate, phase1, bland):
        """Return (step, leaving position or -1, leaves at upper bound)."""
        m = xB.size
        if m == 0:
            return np.inf, -1, False
        big = np.abs(rate) > RATIO_PIVOT_TOL
        dec = big & (rate < 0)
        inc = big & (rate > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            # bound reached by each basic, exact and Harris-relaxed
            bound = np.full(m, np.nan)
            relax = np.zeros(m)
            to_up = np.zeros(m, dtype=bool)
            feas = ~(below | above)
            # decreasing: feasible ones stop at lower, above-upper ones stop at upper
            sel = dec & feas & np.isfinite(lo_B)
            bound[sel] = lo_B[sel]
            relax[sel] = -FEAS_TOL
            sel = dec & above
            bound[sel] = hi_B[sel]
            to_up[sel] = True
            # increasing: feasible ones stop at upper, below-lower ones stop at lower
            sel = inc & feas & np.isfinite(hi_B)
            bound[sel] = hi_B[sel]
            relax[sel] = FEAS_TOL
            to_up[sel] = True
            sel = inc & below
            bound[sel] = lo_B[sel]
            has = ~np.isnan(bound)
            if not has.any():
                return np.inf, -1, False
            idx = np.flatnonzero(has)
            ratio = (bound[idx] - xB[idx]) / rate[idx]
            ratio = np.maximum(ratio, 0.0)
            if bland:
                tmin = ratio.min()
                ties = idx[ratio <= tmin + 1e-12]
                r = int(ties[0])
                return float(ratio[np.flatnonzero(idx == r)[0]]), r, bool(to_up[r])
            rel = (bound[idx] + relax[idx] - xB[idx]) / rate[idx]
            tmax = max(rel.min(), 0.0)
            ok = ratio <= tmax
            pick = idx[ok]
            r = int(pick[np.argmax(np.abs(rate[pick]))])
            t = float(ratio[np.flatnonzero(idx == r)[0]])
            return t, r, bool(to_up[r])

    def _result(self, status: str) -> LpSolution:
        n, m = self.n, self.m
        x = self.x[:n].copy()
        if status == OPTIMAL:
            y, d = self._reduced_costs(self.cost[self.head], self.cost)
            duals = y * self.scale
            rc = d[:n].copy()
        else:
            duals = np.zeros(m)
            rc = np.zeros(n)
        activity = self._A_dot(x) / self.scale if m else np.zeros(0)
        obj = float(self.cost[:n] @ x) if status in (OPTIMAL, CUTOFF) else (
            -np.inf if status == UNBOUNDED else np.inf
        )
        return LpSolution(
            status=status,
            x=x,
            objective=obj,
            duals=duals,
            reduced_costs=rc,
            iterations=self.iterations,
            basis=self.basis(),
            row_activity=activity,
        )


def solve_lp(model: LpModel) -> LpSolution:
    """Cold solve."""
    return SimplexSolver(model).solve()


def solve_lp_warm(model: LpModel, basis: Basis) -> LpSolution:
    """Solve starting from ``basis`` (falls back to a cold start if it is singular)."""
    return SimplexSolver(model, basis).solve()


def dual_objective(model: LpModel, sol: LpSolution) -> float:
    """Dual value ``sum_i y_i b_i + sum_j d_j l_j`` with the active bound picked by sign."""
    total = 0.0
    for y, lo, hi in zip(sol.duals, model.row_lower, model.row_upper):
        if y > 1e-12:
            total += y * lo
        elif y < -1e-12:
            total += y * hi
    for dj, lo, hi in zip(sol.reduced_costs, model.col_lower, model.col_upper):
        if dj > 1e-12:
            total += dj * lo
        elif dj < -1e-12:
            total += dj * hi
    return total
