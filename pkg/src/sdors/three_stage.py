"""Three-stage decomposition.

The outer master decides suites, room counts and patient-to-suite
assignments.  Each suite's room assignment is itself a two-stage problem,
solved by an inner branch-and-cut whose recourse columns ``theta[s, r]``
are the per-room shortest-path values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable

import numpy as np

from .bnc import (
    EARLY_STOP,
    BranchAndCut,
    CallbackVerdict,
    NodeView,
    SolveOptions,
    SolveReport,
)
from .bdd import bdd_benders_cut, extract_duals, knapsack_lp_duals
from .lp import OPTIMAL, LpModel, solve_lp
from .model import (
    BINARY,
    CONTINUOUS,
    INTEGER,
    Cut,
    Instance,
    MipModel,
    ScenarioSet,
    Schedule,
    make_cut,
    operational_cost,
)
from .recourse import BDD, BENDERS_LP, LBBD, RELAXATION, RecourseOracle, relaxation_bound_coefs
from .two_stage import AlgoConfig, expected_cancellation, ffd_initial

TOL = 1e-6
LBBD_LB = "LBBD-early-stop"
G_LINK = "LBBD-g"


# --------------------------------------------------------------------------
# outer master


def build_lbbd_master(inst: Instance, scen: ScenarioSet) -> MipModel:
    inst.validate()
    scen.validate(inst)
    H, D, R, P = inst.hospitals, inst.days, inst.rooms_per_hospital, inst.n_patients
    G, F = inst.suite_open_cost, inst.room_open_cost
    sched = inst.sched
    m = MipModel()
    for h, d in product(range(H), range(D)):
        m.add_var("u", (h, d), BINARY, 0, 1, G[h, d])
    for h, d in product(range(H), range(D)):
        m.add_var("y", (h, d), INTEGER, 0, R, F[h, d])
    for h, d, p in product(range(H), range(D), range(P)):
        m.add_var("x", (h, d, p), BINARY, 0, 1, sched[d, p])
    for p in range(P):
        if not inst.patients[p].mandatory:
            m.add_var("w", (p,), BINARY, 0, 1, inst.patients[p].unsched_penalty)
    for h, d in product(range(H), range(D)):
        m.add_var("Q", (h, d), CONTINUOUS, 0, np.inf, 1.0)
    for h, d, j in product(range(H), range(D), range(R + 1)):
        m.add_var("g", (h, d, j), BINARY, 0, 1, 0.0)
    for p in range(P):
        coefs = {m.col("x", h, d, p): 1.0 for h, d in product(range(H), range(D))}
        if m.has("w", p):
            coefs[m.col("w", p)] = 1.0
        m.add_row(coefs, "=", 1.0, f"assign[{p}]")
    for h, d in product(range(H), range(D)):
        m.add_row({m.col("y", h, d): 1.0, m.col("u", h, d): -float(R)}, "<=", 0.0, f"yu[{h},{d}]")
    for h, d, p in product(range(H), range(D), range(P)):
        m.add_row({m.col("y", h, d): 1.0, m.col("x", h, d, p): -1.0}, ">=", 0.0, f"yx[{h},{d},{p}]")
    return m


def lbbd_cut_3(m: MipModel, hd: tuple[int, int], patients, yhat: int, qbar: float,
               family: str = LBBD) -> tuple[Cut, Cut]:
    """``Q >= Qbar (g_j - sum_{P-hat}(1 - x))`` and ``y >= (1 + yhat)(1 - g_j)`` with ``j = yhat``."""
    h, d = hd
    g = m.col("g", h, d, yhat)
    patients = tuple(sorted(patients))
    coefs = {m.col("Q", h, d): 1.0, g: -qbar}
    for p in patients:
        coefs[m.col("x", h, d, p)] = -qbar
    main = make_cut(coefs, ">=", -qbar * len(patients), family, (h, d, yhat),
                    key=(family, h, d, yhat, patients, round(qbar, 9)))
    link = make_cut({m.col("y", h, d): 1.0, g: float(1 + yhat)}, ">=", float(1 + yhat), G_LINK,
                    (h, d, yhat), key=(G_LINK, h, d, yhat))
    return main, link


def qlb2_bounds(inst: Instance, scen: ScenarioSet, m: MipModel | None = None) -> list[Cut]:
    """``Q_hd >= (1/|S|) sum_s ratio_s (sum_p T x - B y)`` for every suite."""
    m = m or build_lbbd_master(inst, scen)
    S = scen.count
    ratios = np.array([relaxation_bound_coefs(inst, scen, s) for s in range(S)])
    per_patient = (ratios[:, None] * scen.durations).sum(axis=0) / S
    cuts = []
    for h, d in inst.suites():
        coefs = {m.col("Q", h, d): 1.0, m.col("y", h, d): float(ratios.sum() / S * inst.time_limit[h, d])}
        for p in range(inst.n_patients):
            coefs[m.col("x", h, d, p)] = -float(per_patient[p])
        cuts.append(make_cut(coefs, ">=", 0.0, RELAXATION, (h, d)))
    return cuts


# --------------------------------------------------------------------------
# classical cuts from LP relaxations


@dataclass
class OuterLp:
    objective: float
    gamma: np.ndarray  # per patient
    beta: float
    delta: np.ndarray  # per room


def outer_lp(inst: Instance, scen: ScenarioSet, hd: tuple[int, int], xhat, yhat: float) -> OuterLp:
    """Relaxed suite problem with its duals on assignment, room-count and room-bound rows."""
    P, R, S = inst.n_patients, inst.rooms_per_hospital, scen.count
    c = inst.cancel
    B = float(np.floor(inst.time_limit[hd]))
    xi = lambda p, r: p * R + r  # noqa: E731
    yi = lambda r: P * R + r  # noqa: E731
    zi = lambda s, p, r: P * R + R + (s * P + p) * R + r  # noqa: E731
    n = P * R + R + S * P * R
    cost = np.zeros(n)
    for p, r in product(range(P), range(R)):
        cost[xi(p, r)] = c[p]
        for s in range(S):
            cost[zi(s, p, r)] = -c[p] / S
    rows, senses, rhs = [], [], []

    def row(coefs: dict, sense: str, b: float) -> None:
        v = np.zeros(n)
        for k, a in coefs.items():
            v[k] = a
        rows.append(v)
        senses.append(sense)
        rhs.append(b)

    for p in range(P):
        row({xi(p, r): 1.0 for r in range(R)}, "=", float(xhat[p]))
    for s, r in product(range(S), range(R)):
        co = {zi(s, p, r): float(scen.durations[s, p]) for p in range(P)}
        co[yi(r)] = -B
        row(co, "<=", 0.0)
    for s, p, r in product(range(S), range(P), range(R)):
        row({zi(s, p, r): 1.0, xi(p, r): -1.0}, "<=", 0.0)
    for p, r in product(range(P), range(R)):
        row({xi(p, r): 1.0, yi(r): -1.0}, "<=", 0.0)
    row({yi(r): 1.0 for r in range(R)}, "<=", float(yhat))
    for r in range(R):
        row({yi(r): 1.0}, "<=", 1.0)
    model = LpModel.from_constraints(cost, np.array(rows), senses, rhs)
    sol = solve_lp(model)
    if sol.status != OPTIMAL:
        raise RuntimeError(f"suite LP relaxation ended with status {sol.status}")
    y = sol.duals
    gamma = y[:P].copy()
    k = P + S * R + S * P * R + P * R
    beta = min(0.0, float(y[k]))
    delta = np.minimum(0.0, y[k + 1 : k + 1 + R])
    return OuterLp(float(sol.objective), gamma, beta, delta)


def suite_lp(oracle: RecourseOracle, hd: tuple[int, int], xhat, yhat: float) -> OuterLp:
    """Same bound as :func:`outer_lp` from one fractional knapsack per scenario.

    With identical rooms the relaxed suite LP has a symmetric optimum, so it
    equals a single knapsack of capacity ``B * yhat`` with ``z_p <= xhat_p``.
    Its duals give ``gamma_p = c_p + mean delta_p`` and ``beta = B mean eta``.
    """
    inst, scen = oracle.inst, oracle.scen
    B = float(np.floor(inst.time_limit[hd]))
    c = inst.cancel
    xhat = np.clip(np.asarray(xhat, dtype=float), 0.0, 1.0)
    gamma = np.zeros(inst.n_patients)
    beta = 0.0
    objective = 0.0
    for s in range(scen.count):
        sol = knapsack_lp_duals(c, scen.durations[s], B * float(yhat), xhat)
        gamma += c + np.array([sol.delta[p] for p in range(inst.n_patients)])
        beta += B * sol.eta
        objective += sol.objective
    S = scen.count
    return OuterLp(objective / S, gamma / S, beta / S, np.zeros(inst.rooms_per_hospital))


def suite_lp_cut(m: MipModel, hd: tuple[int, int], lp: OuterLp) -> Cut:
    """``Q_hd >= sum_p gamma_p x_hdp + beta y_hd + sum_r delta_r``."""
    h, d = hd
    coefs = {m.col("Q", h, d): 1.0, m.col("y", h, d): -lp.beta}
    for p, gp in enumerate(lp.gamma):
        coefs[m.col("x", h, d, p)] = -float(gp)
    return make_cut(coefs, ">=", float(lp.delta.sum()), BENDERS_LP, (h, d))


def room_lp_cut(theta_col: int, x_cols: dict[int, int], capacity: float, sol, indices) -> Cut:
    """``theta_sr >= sum_p iota_p x_pr + B eta``."""
    coefs = {theta_col: 1.0}
    for p, col in x_cols.items():
        coefs[col] = -float(sol.delta[p])
    return make_cut(coefs, ">=", capacity * sol.eta, BENDERS_LP, indices)


# --------------------------------------------------------------------------
# inner problem


@dataclass
class InnerResult:
    value: float  # best known upper bound (feasible assignment)
    lower: float
    exact: bool
    stopped: bool
    rooms: dict[int, int] = field(default_factory=dict)  # patient -> room
    nodes: int = 0


@dataclass
class InnerState:
    """Cache of inner solves and the early-stop bookkeeping for the current outer candidate."""

    exact: dict[tuple, InnerResult] = field(default_factory=dict)
    approx: dict[tuple, InnerResult] = field(default_factory=dict)
    global_ub: float = np.inf
    incumbent_opt_cost: float = np.inf
    solves: int = 0
    early_stops: int = 0


def early_stop_monitor(state: InnerState, q_lb: float) -> bool:
    """Stop once the candidate provably cannot beat the best known solution."""
    if not np.isfinite(state.global_ub) or not np.isfinite(state.incumbent_opt_cost):
        return False
    return state.global_ub < state.incumbent_opt_cost + q_lb - 1e-9


def inner_ffd(inst: Instance, scen: ScenarioSet, hd, patients, yhat: int) -> dict[int, int]:
    """Room assignment by decreasing cancellation cost, first scenario durations."""
    T = scen.durations[0]
    B = float(inst.time_limit[hd])
    c = inst.cancel
    order = sorted(patients, key=lambda p: (-c[p], p))
    residual: list[float] = []
    out = {}
    for p in order:
        r = next((k for k, left in enumerate(residual) if left >= T[p]), None)
        if r is None:
            if len(residual) < yhat:
                residual.append(B)
                r = len(residual) - 1
            else:
                r = yhat - 1
        residual[r] -= T[p]
        out[p] = r
    return out


class InnerProblem:
    """Room assignment for one suite with per-(scenario, room) recourse columns."""

    def __init__(self, oracle: RecourseOracle, hd: tuple[int, int], patients, yhat: int):
        self.oracle = oracle
        self.inst, self.scen = oracle.inst, oracle.scen
        self.hd = hd
        self.patients = tuple(sorted(patients))
        self.yhat = int(yhat)
        self.capacity = float(np.floor(self.inst.time_limit[hd]))
        c = self.inst.cancel
        S = self.scen.count
        m = MipModel()
        for p, r in product(self.patients, range(self.yhat)):
            m.add_var("x", (p, r), BINARY, 0, 1, c[p])
        for s, r in product(range(S), range(self.yhat)):
            m.add_var("theta", (s, r), CONTINUOUS, -np.inf, 0.0, 1.0 / S)
        for p in self.patients:
            m.add_row({m.col("x", p, r): 1.0 for r in range(self.yhat)}, "=", 1.0, f"assign[{p}]")
        for s, r in product(range(S), range(self.yhat)):
            coefs = {m.col("theta", s, r): 1.0}
            for p in self.patients:
                coefs[m.col("x", p, r)] = float(c[p])
            m.add_row(coefs, ">=", 0.0, f"thetalb[{s},{r}]")
        self.m = m
        self.x_cols = {r: {p: m.col("x", p, r) for p in self.patients} for r in range(self.yhat)}

    def room_members(self, x: np.ndarray, r: int) -> list[int]:
        return [p for p, col in self.x_cols[r].items() if x[col] > 0.5]

    def complete(self, x: np.ndarray) -> tuple[list[Cut], np.ndarray]:
        """Cuts violated at an integral assignment and the point with exact theta."""
        m, o = self.m, self.oracle
        cuts: list[Cut] = []
        full = x.copy()
        for r in range(self.yhat):
            members = self.room_members(x, r)
            upper = np.zeros(self.inst.n_patients)
            upper[members] = 1.0
            for s in range(self.scen.count):
                tcol = m.col("theta", s, r)
                value, _ = o.exact(self.hd, s, members)
                theta = value - float(self.inst.cancel[members].sum()) if members else 0.0
                full[tcol] = theta
                if x[tcol] < theta - TOL:
                    dia = o.diagram(self.hd, s)
                    duals = extract_duals(dia, upper)
                    cut = bdd_benders_cut(dia, duals, tcol, self.x_cols[r], (s, r), with_cost=False, family=BDD)
                    cut.key = (BDD, s, r, tuple(members))
                    cuts.append(cut)
                sol = o.lp(self.hd, s, upper)
                theta_lp = -sol.saved
                if x[tcol] < theta_lp - TOL:
                    cuts.append(room_lp_cut(tcol, self.x_cols[r], self.capacity, sol, (s, r)))
        cuts.sort(key=lambda c: (c.indices, c.family))
        return cuts, full

    def lazy(self, node: NodeView) -> CallbackVerdict:
        cuts, full = self.complete(node.x)
        verdict = CallbackVerdict(cuts=cuts)
        if cuts:
            verdict.solution = (full, self.m.objective(full))
        return verdict

    def user(self, node: NodeView, budget: int) -> CallbackVerdict:
        if budget <= 0:
            return CallbackVerdict()
        x, m = node.x, self.m
        scored = []
        for r in range(self.yhat):
            upper = np.zeros(self.inst.n_patients)
            for p, col in self.x_cols[r].items():
                upper[p] = x[col]
            if upper.max(initial=0.0) <= TOL:
                continue
            for s in range(self.scen.count):
                tcol = m.col("theta", s, r)
                sol = self.oracle.lp(self.hd, s, upper)
                cut = room_lp_cut(tcol, self.x_cols[r], self.capacity, sol, (s, r))
                v = cut.violation(x)
                if v > TOL:
                    scored.append((-v, (s, r), cut))
        scored.sort(key=lambda t: (t[0], t[1]))
        chosen = sorted(scored[:budget], key=lambda t: t[1])
        return CallbackVerdict(cuts=[c for _, _, c in chosen])

    def warm_start(self) -> tuple[np.ndarray, list[Cut]]:
        assign = inner_ffd(self.inst, self.scen, self.hd, self.patients, self.yhat)
        x = np.zeros(self.m.n_cols)
        for p, r in assign.items():
            x[self.m.col("x", p, r)] = 1.0
        cuts, full = self.complete(x)
        return full, cuts

    def rooms_of(self, x: np.ndarray) -> dict[int, int]:
        return {p: r for r in range(self.yhat) for p in self.room_members(x, r)}


def solve_lbbd_subproblem(
    oracle: RecourseOracle,
    hd: tuple[int, int],
    patients,
    yhat: int,
    gap: float = 0.0,
    stop_hook: Callable[[float], bool] | None = None,
    time_limit: float | None = None,
) -> InnerResult:
    """Expected cancellation cost of assigning ``patients`` to ``yhat`` rooms of suite ``hd``."""
    patients = tuple(sorted(patients))
    if not patients:
        return InnerResult(0.0, 0.0, True, False)
    if yhat <= 0:
        raise ValueError("patients assigned to a suite with no open room")
    if yhat == 1:
        q = oracle.expected(hd, patients)
        return InnerResult(q, q, True, False, {p: 0 for p in patients})
    prob = InnerProblem(oracle, hd, patients, yhat)
    warm, cuts = prob.warm_start()
    opts = SolveOptions(gap=gap, warm_start=warm, bound_listener=stop_hook, time_limit=time_limit)
    engine = BranchAndCut(prob.m, prob.lazy, prob.user, opts, cuts)
    rep = engine.solve()
    stopped = rep.termination == EARLY_STOP
    rooms = prob.rooms_of(rep.x) if rep.x is not None else {}
    value = rep.objective if rep.x is not None else np.inf
    closed = rep.x is not None and value - rep.best_bound <= 1e-9 * max(1.0, abs(value))
    exact = closed and not stopped
    lower = value if exact else max(0.0, rep.best_bound)
    return InnerResult(value, lower, exact, stopped, rooms, rep.nodes)


# --------------------------------------------------------------------------
# outer callbacks


class ThreeStageCallbacks:
    def __init__(self, inst: Instance, scen: ScenarioSet, m: MipModel, cfg: AlgoConfig,
                 oracle: RecourseOracle | None = None):
        self.inst, self.scen, self.m, self.cfg = inst, scen, m, cfg
        self.oracle = oracle or RecourseOracle(inst, scen)
        self.state = InnerState()
        self.engine: BranchAndCut | None = None
        self.op_cols = np.array(
            [j for j, n in enumerate(m.names) if not n.startswith(("Q[", "g["))], dtype=int
        )

    def suite_view(self, x: np.ndarray, hd) -> tuple[tuple[int, ...], int]:
        h, d = hd
        pats = tuple(p for p in range(self.inst.n_patients) if x[self.m.col("x", h, d, p)] > 0.5)
        return pats, int(round(x[self.m.col("y", h, d)]))

    def operational(self, x: np.ndarray) -> float:
        obj = np.asarray(self.m.obj)
        return float(obj[self.op_cols] @ x[self.op_cols])

    def inner(self, hd, pats, yhat, allow_stop: bool) -> InnerResult:
        key = (hd, pats, yhat)
        st = self.state
        if key in st.exact:
            return st.exact[key]
        gap = self.cfg.gap
        hook = (lambda lb: early_stop_monitor(st, lb)) if (allow_stop and self.cfg.early_stop) else None
        st.solves += 1
        res = solve_lbbd_subproblem(self.oracle, hd, pats, yhat, gap=gap, stop_hook=hook)
        if res.stopped:
            st.early_stops += 1
        if res.exact:
            st.exact[key] = res
        return res

    def exact_inner(self, hd, pats, yhat) -> InnerResult:
        key = (hd, pats, yhat)
        if key not in self.state.exact:
            self.state.solves += 1
            res = solve_lbbd_subproblem(self.oracle, hd, pats, yhat, gap=0.0)
            self.state.exact[key] = res
        return self.state.exact[key]

    def complete_g(self, v: np.ndarray) -> None:
        """Set ``g_hdj = [y_hd <= j]`` in place."""
        m = self.m
        for (h, d, j), col in m.index["g"].items():
            v[col] = 1.0 if v[m.col("y", h, d)] <= j + 0.5 else 0.0

    def cuts_at(self, x: np.ndarray, qhat_override: float | None = None,
                allow_stop: bool = True) -> tuple[list[Cut], np.ndarray | None]:
        m = self.m
        cuts: list[Cut] = []
        full = x.copy()
        complete = True
        if self.engine is not None:
            self.state.global_ub = self.engine.ub
        self.state.incumbent_opt_cost = self.operational(x)
        for hd in self.inst.suites():
            h, d = hd
            qcol = m.col("Q", h, d)
            qhat = x[qcol] if qhat_override is None else qhat_override
            pats, yhat = self.suite_view(x, hd)
            if not pats:
                full[qcol] = 0.0
                continue
            res = self.inner(hd, pats, yhat, allow_stop)
            if res.stopped and qhat < res.lower - TOL:
                complete = False
                cuts.extend(lbbd_cut_3(m, hd, pats, yhat, res.lower, LBBD_LB))
                continue
            if not res.exact and not res.stopped:
                if qhat < res.lower - TOL:
                    cuts.extend(lbbd_cut_3(m, hd, pats, yhat, res.lower, LBBD_LB))
                    full[qcol] = res.value
                    self._add_lp_cut(cuts, x, hd, pats, yhat, qhat)
                    continue
            if not res.exact:
                res = self.exact_inner(hd, pats, yhat)
            full[qcol] = res.value
            if qhat < res.value - TOL:
                cuts.extend(lbbd_cut_3(m, hd, pats, yhat, res.value))
            self._add_lp_cut(cuts, x, hd, pats, yhat, qhat)
        self.complete_g(full)
        cuts.sort(key=lambda c: (c.indices, c.family))
        return cuts, (full if complete else None)

    def _add_lp_cut(self, cuts, x, hd, pats, yhat, qhat) -> None:
        xhat = np.zeros(self.inst.n_patients)
        xhat[list(pats)] = 1.0
        lp = suite_lp(self.oracle, hd, xhat, yhat)
        if qhat < lp.objective - TOL:
            cuts.append(suite_lp_cut(self.m, hd, lp))

    def lazy(self, node: NodeView) -> CallbackVerdict:
        cuts, full = self.cuts_at(node.x)
        verdict = CallbackVerdict(cuts=cuts)
        if cuts and full is not None:
            verdict.solution = (full, self.m.objective(full))
        return verdict

    def user(self, node: NodeView, budget: int) -> CallbackVerdict:
        if budget <= 0:
            return CallbackVerdict()
        x, m = node.x, self.m
        scored = []
        for h, d in self.inst.suites():
            xhat = np.array([x[m.col("x", h, d, p)] for p in range(self.inst.n_patients)])
            if xhat.max(initial=0.0) <= TOL:
                continue
            lp = suite_lp(self.oracle, (h, d), xhat, max(0.0, x[m.col("y", h, d)]))
            cut = suite_lp_cut(m, (h, d), lp)
            v = cut.violation(x)
            if v > TOL:
                scored.append((-v, (h, d), cut))
        scored.sort(key=lambda t: (t[0], t[1]))
        chosen = sorted(scored[:budget], key=lambda t: t[1])
        return CallbackVerdict(cuts=[c for _, _, c in chosen])


def master_from_schedule(inst: Instance, m: MipModel, sched: Schedule) -> np.ndarray:
    v = np.zeros(m.n_cols)
    for h, d in sched.open_suites:
        v[m.col("u", h, d)] = 1.0
    for (h, d), k in sched.rooms_per_suite.items():
        v[m.col("y", h, d)] = float(k)
    for p, (h, d, _) in sched.assignment.items():
        v[m.col("x", h, d, p)] = 1.0
    for p in sched.postponed:
        if m.has("w", p):
            v[m.col("w", p)] = 1.0
    return v


def expand_schedule(inst: Instance, m: MipModel, x: np.ndarray, cbs: ThreeStageCallbacks) -> Schedule:
    """Room-level schedule from an outer solution using exact inner solves."""
    assignment: dict[int, tuple[int, int, int]] = {}
    rooms: list[tuple[int, int, int]] = []
    counts: dict[tuple[int, int], int] = {}
    for hd in inst.suites():
        h, d = hd
        pats, yhat = cbs.suite_view(x, hd)
        if yhat <= 0:
            continue
        counts[hd] = yhat
        rooms.extend((h, d, r) for r in range(yhat))
        if pats:
            res = cbs.exact_inner(hd, pats, yhat)
            for p, r in res.rooms.items():
                assignment[p] = (h, d, r)
    postponed = [p for p in range(inst.n_patients) if p not in assignment]
    sched = Schedule(assignment, postponed, sorted(rooms), counts)
    sched.operational_cost = operational_cost(inst, sched)
    sched.expected_cancellation_cost = expected_cancellation(cbs.oracle, sched)
    return sched


def solve_three_stage(inst: Instance, scen: ScenarioSet, cfg: AlgoConfig | None = None
                      ) -> tuple[SolveReport, Schedule | None]:
    cfg = cfg or AlgoConfig()
    cfg.validate()
    m = build_lbbd_master(inst, scen)
    oracle = RecourseOracle(inst, scen)
    cbs = ThreeStageCallbacks(inst, scen, m, cfg, oracle)
    initial: list[Cut] = []
    warm = None
    ffd_status = "disabled"
    candidates = list(cfg.starts)
    if cfg.ffd:
        res = ffd_initial(inst, scen, oracle)
        ffd_status = "failed" if res.failed else "ok"
        if res.schedule is not None:
            candidates.insert(0, res.schedule)
    best = np.inf
    for sched in candidates:
        base = master_from_schedule(inst, m, sched)
        cuts, full = cbs.cuts_at(base, qhat_override=0.0, allow_stop=False)
        if cfg.initial_cuts:
            initial.extend(cuts)
        if m.objective(full) < best - 1e-9:
            warm, best = full, m.objective(full)
    if cfg.relaxation_bounds:
        initial.extend(qlb2_bounds(inst, scen, m))
    opts = SolveOptions(gap=cfg.gap, node_limit=cfg.node_limit, time_limit=cfg.time_limit,
                        warm_start=warm, trace=cfg.trace)
    engine = BranchAndCut(m, cbs.lazy, cbs.user if cfg.user_cuts else None, opts, initial)
    cbs.engine = engine
    report = engine.solve()
    report.extra["ffd"] = ffd_status
    report.extra["inner_solves"] = cbs.state.solves
    report.extra["early_stops"] = cbs.state.early_stops
    sched = None
    if report.x is not None:
        sched = expand_schedule(inst, m, report.x, cbs)
        report.extra["exact_objective"] = sched.objective
        report.extra["operational_cost"] = sched.operational_cost
        report.extra["expected_cancellation_cost"] = sched.expected_cancellation_cost
    return report, sched
