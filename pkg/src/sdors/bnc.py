"""Single-threaded branch-and-cut with lazy/user cut callbacks.

Search order is fixed for reproducibility: best-bound node selection (ties
by node id), most-fractional branching (ties by lowest column id).  Cuts
returned by callbacks go into a global pool; pool rows that stay slack are
dropped from the node LP and re-activated when an integral candidate
violates them.
"""
from __future__ import annotations

import csv
import heapq
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .lp import BASIC, CUTOFF, INFEASIBLE, OPTIMAL, UNBOUNDED, Basis, SimplexError, SimplexSolver
from .model import Cut, MipModel, Row

INT_TOL = 1e-6
VIOLATION_TOL = 1e-6
INJECT_TOL = 1e-9
PURGE_EVERY = 25
PURGE_AGE = 10

GAP = "gap"
NODE_LIMIT = "node-limit"
TIME_LIMIT = "time-limit"
INFEASIBLE_END = "infeasible"
EARLY_STOP = "early-stop"


class CallbackError(RuntimeError):
    """A callback raised; the message carries the node context."""


@dataclass
class NodeView:
    x: np.ndarray
    objective: float
    node_id: int
    depth: int
    integral: bool
    processed: int = 0


@dataclass
class CallbackVerdict:
    cuts: list[Cut] = field(default_factory=list)
    solution: tuple[np.ndarray, float] | None = None
    prune: bool = False


def user_cut_policy(node_count: int) -> tuple[bool, int]:
    """Whether user cuts may be separated at the ``node_count``-th processed node, and how many."""
    if node_count >= 4000:
        return False, 0
    if node_count == 0:
        return True, 50
    if node_count % 150 == 0:
        return True, 5
    return False, 0


@dataclass
class SolveOptions:
    gap: float = 0.01
    node_limit: int | None = None
    time_limit: float | None = None
    warm_start: np.ndarray | None = None
    incumbent_listener: Callable[[np.ndarray, float], None] | None = None
    bound_listener: Callable[[float], bool] | None = None
    cut_policy: Callable[[int], tuple[bool, int]] = user_cut_policy
    max_user_rounds: int = 10
    trace: bool = False


@dataclass
class SolveReport:
    termination: str
    x: np.ndarray | None
    objective: float
    best_bound: float
    gap: float
    nodes: int
    cuts: dict[str, int]
    wall_time: float
    ub_trace: list[float] = field(default_factory=list)
    lb_trace: list[float] = field(default_factory=list)
    trace: list[tuple[int, float, float, int]] = field(default_factory=list)
    lp_iterations: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None

    def to_dict(self, include_timing: bool = True) -> dict:
        def num(v: float):
            if v is None or (isinstance(v, float) and math.isinf(v)):
                return None if v is None else ("inf" if v > 0 else "-inf")
            return float(v)

        out = {
            "termination": self.termination,
            "objective": num(self.objective),
            "best_bound": num(self.best_bound),
            "gap": num(self.gap),
            "nodes": self.nodes,
            "cuts": dict(sorted(self.cuts.items())),
            "lp_iterations": self.lp_iterations,
            "incumbent": None if self.x is None else [float(v) for v in self.x],
            "ub_trace": [num(v) for v in self.ub_trace],
            "lb_trace": [num(v) for v in self.lb_trace],
            "extra": self.extra,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True)

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "lb", "ub", "cuts_added"])
            for row in self.trace:
                w.writerow(row)


def relative_gap(ub: float, lb: float) -> float:
    if not math.isfinite(ub):
        return math.inf
    if not math.isfinite(lb):
        return math.inf
    return max(0.0, (ub - lb) / max(abs(lb), 1e-9))


@dataclass(order=True)
class _Node:
    bound: float
    node_id: int
    depth: int = field(compare=False)
    changes: tuple = field(compare=False, default=())
    basis: tuple | None = field(compare=False, default=None)  # (row version, n active rows, status)


class _PoolEntry:
    __slots__ = ("cut", "active", "age")

    def __init__(self, cut: Cut):
        self.cut = cut
        self.active = False
        self.age = 0


def _cut_key(cut: Row) -> tuple:
    key = getattr(cut, "key", None)
    if key is not None:
        return ("k",) + tuple(key)
    return (
        tuple(cut.cols.tolist()),
        tuple(np.round(cut.coefs, 9).tolist()),
        cut.sense,
        round(cut.rhs, 9),
    )


def _rel_violation(row: Row, x: np.ndarray) -> float:
    scale = 1.0 + max(abs(row.rhs), float(np.max(np.abs(row.coefs), initial=0.0)))
    return row.violation(x) / scale


def _bounds_of(sense: str, rhs: float) -> tuple[float, float]:
    if sense == "<=":
        return -np.inf, rhs
    if sense == ">=":
        return rhs, np.inf
    return rhs, rhs


class BranchAndCut:
    def __init__(
        self,
        model: MipModel,
        lazy_cb: Callable[[NodeView], CallbackVerdict] | None = None,
        user_cb: Callable[[NodeView, int], CallbackVerdict] | None = None,
        opts: SolveOptions | None = None,
        initial_cuts: Sequence[Cut] = (),
    ):
        self.model = model
        self.lazy_cb = lazy_cb
        self.user_cb = user_cb
        self.opts = opts or SolveOptions()
        self.int_cols = np.flatnonzero(model.integer_mask())
        self.root_lb = np.array(model.lb, dtype=float)
        self.root_ub = np.array(model.ub, dtype=float)
        self.obj = np.array(model.obj, dtype=float)
        self.solver = SimplexSolver(model.to_lp())
        self.n_base = model.n_rows
        self.pool: list[_PoolEntry] = []
        self.pool_keys: dict[tuple, int] = {}
        self.active: list[int] = []  # pool ids in LP row order after the base rows
        self._row_version = 0  # bumped whenever rows are removed
        self._pool_matrix: sp.csr_matrix | None = None
        self._pool_matrix_size = 0
        self.cut_counts: dict[str, int] = {}
        self.ub = math.inf
        self.x_best: np.ndarray | None = None
        self.lb = -math.inf
        self.ub_trace: list[float] = []
        self.lb_trace: list[float] = []
        self.trace: list[tuple[int, float, float, int]] = []
        self.processed = 0
        self.last_rejection: str | None = None
        self._in_verify = False
        for cut in initial_cuts:
            self._add_to_pool(cut, activate=True)

    # ------------------------------------------------------------ cut pool
    def _add_to_pool(self, cut: Cut, activate: bool) -> bool:
        key = _cut_key(cut)
        if key in self.pool_keys:
            entry = self.pool[self.pool_keys[key]]
            if activate and not entry.active:
                self._activate([self.pool_keys[key]])
                return True
            return False
        self.pool_keys[key] = len(self.pool)
        self.pool.append(_PoolEntry(cut))
        fam = getattr(cut, "family", "") or "other"
        self.cut_counts[fam] = self.cut_counts.get(fam, 0) + 1
        if activate:
            self._activate([len(self.pool) - 1])
        return True

    def _activate(self, ids: Sequence[int]) -> None:
        ids = [i for i in ids if not self.pool[i].active]
        if not ids:
            return
        n = self.model.n_cols
        rows = np.zeros((len(ids), n))
        lo = np.empty(len(ids))
        hi = np.empty(len(ids))
        for k, i in enumerate(ids):
            c = self.pool[i].cut
            rows[k, c.cols] = c.coefs
            lo[k], hi[k] = _bounds_of(c.sense, c.rhs)
            self.pool[i].active = True
            self.pool[i].age = 0
        self.solver.add_rows(rows, lo, hi)
        self.active.extend(ids)

    def _purge(self) -> None:
        n = self.model.n_cols
        drop_rows, keep = [], []
        for pos, pid in enumerate(self.active):
            row = self.n_base + pos
            entry = self.pool[pid]
            if entry.age >= PURGE_AGE and self.solver.status[n + row] == BASIC:
                drop_rows.append(row)
                entry.active = False
            else:
                keep.append(pid)
        if drop_rows:
            self.solver.remove_rows(drop_rows)
            self.active = keep
            self._row_version += 1

    def _age_cuts(self) -> None:
        n = self.model.n_cols
        st = self.solver.status
        for pos, pid in enumerate(self.active):
            if st[n + self.n_base + pos] == BASIC:
                self.pool[pid].age += 1
            else:
                self.pool[pid].age = 0

    def _pool_violations(self, x: np.ndarray) -> list[int]:
        """Inactive pool cuts violated at ``x``."""
        if len(self.pool) != self._pool_matrix_size:
            data, ind, ptr = [], [], [0]
            lo, hi = [], []
            for e in self.pool:
                ind.extend(e.cut.cols.tolist())
                data.extend(e.cut.coefs.tolist())
                ptr.append(len(ind))
                a, b = _bounds_of(e.cut.sense, e.cut.rhs)
                lo.append(a)
                hi.append(b)
            self._pool_matrix = sp.csr_matrix((data, ind, ptr), shape=(len(self.pool), self.model.n_cols))
            self._pool_lo = np.array(lo)
            self._pool_hi = np.array(hi)
            self._pool_scale = np.array(
                [1.0 + max(abs(e.cut.rhs), float(np.max(np.abs(e.cut.coefs), initial=0.0))) for e in self.pool]
            )
            self._pool_matrix_size = len(self.pool)
        if not self.pool:
            return []
        act = self._pool_matrix @ x
        viol = np.maximum(self._pool_lo - act, act - self._pool_hi) / self._pool_scale
        return [int(i) for i in np.flatnonzero(viol > VIOLATION_TOL) if not self.pool[i].active]

    def _take_cuts(self, cuts: Sequence[Cut], x: np.ndarray, limit: int | None = None) -> int:
        """Add the cuts violated at ``x`` (at most ``limit``, most violated first); return the count."""
        scored = []
        for k, c in enumerate(cuts):
            v = _rel_violation(c, x)
            if v > VIOLATION_TOL:
                scored.append((-v, k))
        if limit is not None:
            scored = sorted(scored)[:limit]
            scored.sort(key=lambda t: t[1])
        added = 0
        for _, k in scored:
            if self._add_to_pool(cuts[k], activate=True):
                added += 1
        return added

    # ------------------------------------------------------------ incumbents
    def check_candidate(self, x: np.ndarray) -> str | None:
        """Return a description of the first violated constraint, or None."""
        xi = x[self.int_cols]
        if np.any(np.abs(xi - np.round(xi)) > INT_TOL):
            return "integrality"
        if np.any(x < self.root_lb - VIOLATION_TOL) or np.any(x > self.root_ub + VIOLATION_TOL):
            return "bounds"
        for i, r in enumerate(self.model.rows):
            if _rel_violation(r, x) > VIOLATION_TOL:
                return f"row {i} ({r.name})"
        for i, e in enumerate(self.pool):
            if _rel_violation(e.cut, x) > VIOLATION_TOL:
                return f"cut {i} ({e.cut.name})"
        return None

    def inject_solution(self, candidate: np.ndarray, objective: float | None = None) -> bool:
        """Offer a complete solution; accepted iff feasible and better than the incumbent."""
        x = np.asarray(candidate, dtype=float).copy()
        x[self.int_cols] = np.round(x[self.int_cols])
        obj = self.model.objective(x) if objective is None else float(objective)
        if not obj < self.ub - INJECT_TOL:
            self.last_rejection = "not better than incumbent"
            return False
        bad = self.check_candidate(x)
        if bad is not None:
            self.last_rejection = bad
            return False
        if self.lazy_cb is not None and not self._in_verify:
            self._in_verify = True
            try:
                verdict = self._call(self.lazy_cb, NodeView(x, obj, -1, 0, True, self.processed))
            finally:
                self._in_verify = False
            viol = [c for c in verdict.cuts if _rel_violation(c, x) > VIOLATION_TOL]
            if viol:
                for c in viol:
                    self._add_to_pool(c, activate=True)
                self.last_rejection = f"lazy cut {viol[0].name}"
                return False
        self._set_incumbent(x, obj)
        return True

    def _set_incumbent(self, x: np.ndarray, obj: float) -> None:
        self.ub = obj
        self.x_best = x
        self.ub_trace.append(obj)
        self.last_rejection = None
        if self.opts.incumbent_listener is not None:
            self.opts.incumbent_listener(x, obj)

    def _call(self, cb, view: NodeView, *args) -> CallbackVerdict:
        try:
            res = cb(view, *args)
        except Exception as exc:  # surfaced with node context
            raise CallbackError(f"callback failed at node {view.node_id}: {exc!r}") from exc
        return res if res is not None else CallbackVerdict()

    # ---------------------------------------------------------------- search
    def _apply_bounds(self, changes: tuple) -> None:
        lo = self.root_lb.copy()
        hi = self.root_ub.copy()
        for j, a, b in changes:
            lo[j] = max(lo[j], a)
            hi[j] = min(hi[j], b)
        self.solver.set_all_col_bounds(lo, hi)

    def _restore_basis(self, snap: tuple | None) -> None:
        """Warm start from the parent's final basis when the row set is still compatible."""
        if snap is None:
            return
        version, n_active, status = snap
        if version != self._row_version or n_active > len(self.active):
            return
        try:
            self.solver.set_basis(Basis(self.model.n_cols, status))
        except (SimplexError, ValueError):
            pass

    def _prune_level(self) -> float:
        if not math.isfinite(self.ub):
            return math.inf
        return self.ub - 1e-9 * max(1.0, abs(self.ub))

    def _update_lb(self, candidates: Sequence[float]) -> bool:
        """Raise the global bound; return True if the bound listener asks to stop."""
        new = min(candidates) if candidates else self.ub
        if math.isfinite(self.ub):
            new = min(new, self.ub)
        if new > self.lb:
            self.lb = new
            self.lb_trace.append(new)
            if self.opts.bound_listener is not None and self.opts.bound_listener(new):
                return True
        return False

    def solve(self) -> SolveReport:
        t0 = time.perf_counter()
        opts = self.opts
        if opts.warm_start is not None:
            self.inject_solution(opts.warm_start)
        heap: list[_Node] = [_Node(-math.inf, 0, 0, ())]
        next_id = 1
        termination = None
        while True:
            lbs = [heap[0].bound] if heap else []  # heap is ordered by bound
            if self._update_lb(lbs):
                termination = EARLY_STOP
                break
            if not heap:
                termination = GAP if self.x_best is not None else INFEASIBLE_END
                if self.x_best is not None:
                    self.lb = max(self.lb, self.ub) if not math.isfinite(self.lb) else self.lb
                break
            if self.x_best is not None and relative_gap(self.ub, self.lb) <= opts.gap:
                termination = GAP
                break
            if opts.node_limit is not None and self.processed >= opts.node_limit:
                termination = NODE_LIMIT
                break
            if opts.time_limit is not None and time.perf_counter() - t0 > opts.time_limit:
                termination = TIME_LIMIT
                break
            node = heapq.heappop(heap)
            if node.bound >= self._prune_level():
                continue
            children, stop = self._process(node, next_id, heap)
            for ch in children:
                heapq.heappush(heap, ch)
            next_id += len(children)
            if stop:
                termination = EARLY_STOP
                break
        if termination in (GAP, INFEASIBLE_END) and not heap:
            self.lb = self.ub if self.x_best is not None else self.lb
            if self.x_best is not None and (not self.lb_trace or self.lb_trace[-1] < self.lb):
                self.lb_trace.append(self.lb)
        return SolveReport(
            termination=termination,
            x=self.x_best,
            objective=self.ub,
            best_bound=self.lb,
            gap=relative_gap(self.ub, self.lb),
            nodes=self.processed,
            cuts=dict(self.cut_counts),
            wall_time=time.perf_counter() - t0,
            ub_trace=list(self.ub_trace),
            lb_trace=list(self.lb_trace),
            trace=list(self.trace),
            lp_iterations=self.solver.iterations,
        )

    def _process(self, node: _Node, next_id: int, heap: list[_Node]) -> tuple[list[_Node], bool]:
        idx = self.processed
        self.processed += 1
        if idx and idx % PURGE_EVERY == 0:
            self._purge()
        self._apply_bounds(node.changes)
        self._restore_basis(node.basis)
        allowed, budget = self.opts.cut_policy(idx) if self.user_cb is not None else (False, 0)
        user_rounds = 0
        added_total = 0
        children: list[_Node] = []
        while True:
            sol = self.solver.solve(cutoff=self._prune_level())
            if sol.status in (INFEASIBLE, CUTOFF):
                break
            if sol.status == UNBOUNDED:
                raise RuntimeError("node LP unbounded; the model needs finite bounds on its objective")
            bound = sol.objective
            if bound >= self._prune_level():
                break
            if self._update_lb([bound, heap[0].bound] if heap else [bound]):
                self._record(node, added_total)
                return [], True
            x = sol.x
            xi = x[self.int_cols]
            frac = np.abs(xi - np.round(xi))
            if np.all(frac <= INT_TOL):
                cand = x.copy()
                cand[self.int_cols] = np.round(xi)
                view = NodeView(cand, bound, node.node_id, node.depth, True, idx)
                verdict = self._call(self.lazy_cb, view) if self.lazy_cb is not None else CallbackVerdict()
                if verdict.solution is not None:
                    self.inject_solution(*verdict.solution)
                added = self._take_cuts(verdict.cuts, cand)
                pool_viol = self._pool_violations(cand)
                if pool_viol:
                    self._activate(pool_viol)
                    added += len(pool_viol)
                if added:
                    added_total += added
                    continue
                if verdict.prune:
                    break
                obj = self.model.objective(cand)
                if obj < self.ub - INJECT_TOL:
                    bad = self.check_candidate(cand)
                    if bad is None:
                        self._set_incumbent(cand, obj)
                break
            if allowed and budget > 0 and user_rounds < self.opts.max_user_rounds:
                view = NodeView(x.copy(), bound, node.node_id, node.depth, False, idx)
                verdict = self._call(self.user_cb, view, budget)
                if verdict.solution is not None:
                    self.inject_solution(*verdict.solution)
                added = self._take_cuts(verdict.cuts, x, limit=budget)
                user_rounds += 1
                if added:
                    budget -= added
                    added_total += added
                    continue
            score = np.minimum(xi - np.floor(xi), np.ceil(xi) - xi)
            k = int(np.argmax(score))
            j = int(self.int_cols[k])
            v = x[j]
            down = node.changes + ((j, -math.inf, math.floor(v)),)
            up = node.changes + ((j, math.ceil(v), math.inf),)
            snap = (self._row_version, len(self.active), self.solver.status.copy())
            children = [
                _Node(bound, next_id, node.depth + 1, down, snap),
                _Node(bound, next_id + 1, node.depth + 1, up, snap),
            ]
            break
        self._age_cuts()
        self._record(node, added_total)
        return children, False

    def _record(self, node: _Node, added: int) -> None:
        if self.opts.trace:
            self.trace.append((node.node_id, self.lb, self.ub, added))


def solve(
    model: MipModel,
    lazy_cb: Callable[[NodeView], CallbackVerdict] | None = None,
    user_cb: Callable[[NodeView, int], CallbackVerdict] | None = None,
    opts: SolveOptions | None = None,
    initial_cuts: Sequence[Cut] = (),
) -> SolveReport:
    return BranchAndCut(model, lazy_cb, user_cb, opts, initial_cuts).solve()
