"""Two-stage decomposition: room-level master with per-scenario recourse columns.

Phase one builds an FFD schedule, derives cuts from it and adds the
relaxation-bound rows.  Phase two runs branch-and-cut with exact cuts (LBBD
or BDD-Benders) at integral nodes and LP Benders cuts at fractional nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .bnc import CallbackVerdict, NodeView, SolveOptions, SolveReport, solve
from .model import (
    Cut,
    Instance,
    MipModel,
    ScenarioSet,
    Schedule,
    build_de,
    build_two_stage_master,
    make_cut,
    operational_cost,
    schedule_from_room_solution,
)
from .recourse import RELAXATION, RecourseOracle, relaxation_bound_coefs

TOL = 1e-6


@dataclass
class AlgoConfig:
    cut_family: str = "lbbd"  # lbbd | bdd | both
    gap: float = 0.01
    time_limit: float | None = None
    node_limit: int | None = None
    ffd: bool = True
    relaxation_bounds: bool = True
    initial_cuts: bool = True
    user_cuts: bool = True
    early_stop: bool = True
    seed: int = 0
    trace: bool = False
    starts: tuple = ()  # extra feasible schedules offered as incumbents

    def validate(self) -> None:
        if self.cut_family not in ("lbbd", "bdd", "both"):
            raise ValueError(f"unknown cut family {self.cut_family!r}")
        if self.gap < 0:
            raise ValueError("gap must be non-negative")


# --------------------------------------------------------------------------
# FFD heuristic


@dataclass
class FfdResult:
    schedule: Schedule | None
    failed: bool = False
    message: str = ""


def suite_order(inst: Instance) -> list[tuple[int, int]]:
    """(h, d) pairs by decreasing capacity, ties by index."""
    return sorted(inst.suites(), key=lambda hd: (-inst.time_limit[hd], hd))


def patient_order(inst: Instance) -> list[int]:
    """Mandatory patients first, each group by decreasing health score, ties by id."""
    return sorted(range(inst.n_patients), key=lambda p: (not inst.patients[p].mandatory,
                                                         -inst.patients[p].health_score, p))


def _reorder_rooms(inst: Instance, assignment: dict[int, tuple[int, int, int]],
                   opened: list[tuple[int, int, int]]) -> tuple[dict, list]:
    """Relabel rooms inside each suite by decreasing total cancellation cost."""
    cancel = inst.cancel
    new_assign, new_rooms = {}, []
    for hd in inst.suites():
        rooms = [k for k in opened if k[:2] == hd]
        if not rooms:
            continue
        load = {k: sum(cancel[p] for p, kk in assignment.items() if kk == k) for k in rooms}
        ranked = sorted(rooms, key=lambda k: (-load[k], k[2]))
        relabel = {k: (hd[0], hd[1], i) for i, k in enumerate(ranked)}
        new_rooms.extend(relabel[k] for k in ranked)
        for p, k in assignment.items():
            if k in relabel:
                new_assign[p] = relabel[k]
    return new_assign, sorted(new_rooms)


def ffd_initial(inst: Instance, scen: ScenarioSet, oracle: RecourseOracle | None = None) -> FfdResult:
    """First-fit-decreasing schedule using the first scenario's durations."""
    T = scen.durations[0]
    rooms = [(h, d, r) for h, d in suite_order(inst) for r in range(inst.rooms_per_hospital)]
    opened: list[tuple[int, int, int]] = []
    residual: dict[tuple[int, int, int], float] = {}
    assignment: dict[int, tuple[int, int, int]] = {}
    postponed: list[int] = []
    for p in patient_order(inst):
        t = float(T[p])
        target = next((k for k in opened if residual[k] >= t), None)
        if target is None:
            target = next((k for k in rooms if k not in residual and inst.time_limit[k[:2]] >= t), None)
            if target is not None:
                opened.append(target)
                residual[target] = float(inst.time_limit[target[:2]])
        if target is None:
            if inst.patients[p].mandatory:
                return FfdResult(None, True, f"mandatory patient {p} does not fit any room")
            postponed.append(p)
            continue
        residual[target] -= t
        assignment[p] = target
    assignment, open_rooms = _reorder_rooms(inst, assignment, opened)
    counts: dict[tuple[int, int], int] = {}
    for h, d, _ in open_rooms:
        counts[(h, d)] = counts.get((h, d), 0) + 1
    sched = Schedule(assignment, sorted(postponed), open_rooms, counts)
    sched.operational_cost = operational_cost(inst, sched)
    oracle = oracle or RecourseOracle(inst, scen)
    sched.expected_cancellation_cost = expected_cancellation(oracle, sched)
    return FfdResult(sched)


def expected_cancellation(oracle: RecourseOracle, sched: Schedule) -> float:
    total = 0.0
    for (h, d, r), pats in sched.room_patients().items():
        if pats:
            total += oracle.expected((h, d), pats)
    return total


def schedule_to_master(inst: Instance, m: MipModel, sched: Schedule, oracle: RecourseOracle) -> np.ndarray:
    """Master vector (u, y, x, w, Q) of a schedule with exact Q values."""
    v = np.zeros(m.n_cols)
    for h, d in sched.open_suites:
        v[m.col("u", h, d)] = 1.0
    for h, d, r in sched.open_rooms:
        v[m.col("y", h, d, r)] = 1.0
    for p, (h, d, r) in sched.assignment.items():
        v[m.col("x", h, d, p, r)] = 1.0
    for p in sched.postponed:
        if m.has("w", p):
            v[m.col("w", p)] = 1.0
    rp = sched.room_patients()
    for (h, d, r, s), col in m.index["Q"].items():
        pats = rp.get((h, d, r), [])
        v[col] = oracle.exact((h, d), s, pats)[0] if pats else 0.0
    return v


# --------------------------------------------------------------------------
# cuts


def lbbd_cut(oracle: RecourseOracle, m: MipModel, hdr: tuple[int, int, int], s: int,
             patients, qbar: float) -> Cut:
    h, d, r = hdr
    x_cols = {p: m.col("x", h, d, p, r) for p in range(oracle.inst.n_patients)}
    return oracle.lbbd_cut(m.col("Q", h, d, r, s), x_cols, patients, qbar, (h, d, r, s))


def relaxation_bounds(inst: Instance, scen: ScenarioSet, m: MipModel | None = None) -> list[Cut]:
    """``Q >= ratio_s (sum_p T x - B)`` for every room and scenario."""
    m = m or build_two_stage_master(inst, scen)
    cuts = []
    T = scen.durations
    for h, d, r, s in product(range(inst.hospitals), range(inst.days), range(inst.rooms_per_hospital),
                              range(scen.count)):
        k = relaxation_bound_coefs(inst, scen, s)
        coefs = {m.col("Q", h, d, r, s): 1.0}
        for p in range(inst.n_patients):
            coefs[m.col("x", h, d, p, r)] = -k * float(T[s, p])
        cuts.append(make_cut(coefs, ">=", -k * float(inst.time_limit[h, d]), RELAXATION, (h, d, r, s)))
    return cuts


class TwoStageCallbacks:
    """Lazy and user callbacks for the room-level master."""

    def __init__(self, inst: Instance, scen: ScenarioSet, m: MipModel, cfg: AlgoConfig,
                 oracle: RecourseOracle | None = None):
        self.inst, self.scen, self.m, self.cfg = inst, scen, m, cfg
        self.oracle = oracle or RecourseOracle(inst, scen)
        P = inst.n_patients
        self.x_cols = {
            (h, d, r): {p: m.col("x", h, d, p, r) for p in range(P)} for h, d, r in inst.rooms()
        }

    def room_patients(self, x: np.ndarray, hdr) -> list[int]:
        cols = self.x_cols[hdr]
        return [p for p, c in cols.items() if x[c] > 0.5]

    def exact_cuts(self, hdr, s: int, pats, qbar: float) -> list[Cut]:
        h, d, r = hdr
        q = self.m.col("Q", h, d, r, s)
        out = []
        if self.cfg.cut_family in ("lbbd", "both"):
            out.append(self.oracle.lbbd_cut(q, self.x_cols[hdr], pats, qbar, (h, d, r, s)))
        if self.cfg.cut_family in ("bdd", "both"):
            out.append(self.oracle.bdd_cut(q, self.x_cols[hdr], (h, d), s, pats, (h, d, r, s)))
        return out

    def cuts_at(self, x: np.ndarray, qhat=None) -> tuple[list[Cut], np.ndarray]:
        """Cuts violated at an integral point and the completed point with exact Q."""
        cuts: list[Cut] = []
        full = x.copy()
        m = self.m
        for h, d, r in self.inst.rooms():
            pats = self.room_patients(x, (h, d, r))
            upper = np.zeros(self.inst.n_patients)
            upper[pats] = 1.0
            for s in range(self.scen.count):
                q = m.col("Q", h, d, r, s)
                qbar = self.oracle.exact((h, d), s, pats)[0] if pats else 0.0
                full[q] = qbar
                cur = x[q] if qhat is None else qhat
                if not pats:
                    continue
                if cur < qbar - TOL:
                    cuts.extend(self.exact_cuts((h, d, r), s, pats, qbar))
                sol = self.oracle.lp((h, d), s, upper)
                if cur < sol.objective - TOL:
                    cuts.append(self.oracle.lp_cut(q, self.x_cols[(h, d, r)], (h, d), sol, (h, d, r, s)))
        return _sorted(cuts), full

    def lazy(self, node: NodeView) -> CallbackVerdict:
        cuts, full = self.cuts_at(node.x)
        verdict = CallbackVerdict(cuts=cuts)
        if cuts:
            verdict.solution = (full, self.m.objective(full))
        return verdict

    def user(self, node: NodeView, budget: int) -> CallbackVerdict:
        if budget <= 0:
            return CallbackVerdict()
        x, m = node.x, self.m
        scored = []
        for h, d, r in self.inst.rooms():
            upper = np.array([x[c] for c in self.x_cols[(h, d, r)].values()])
            if upper.max(initial=0.0) <= TOL:
                continue
            for s in range(self.scen.count):
                q = m.col("Q", h, d, r, s)
                sol = self.oracle.lp((h, d), s, upper)
                viol = sol.objective - x[q]
                if viol > TOL:
                    cut = self.oracle.lp_cut(q, self.x_cols[(h, d, r)], (h, d), sol, (h, d, r, s))
                    if cut.violation(x) > TOL:
                        scored.append((-viol, (s, h, d, r), cut))
        scored.sort(key=lambda t: (t[0], t[1]))
        chosen = sorted(scored[:budget], key=lambda t: t[1])
        return CallbackVerdict(cuts=[c for _, _, c in chosen])


def _sorted(cuts: list[Cut]) -> list[Cut]:
    """Order by (s, h, d, r) then family."""
    def key(c: Cut):
        h, d, r, s = c.indices
        return (s, h, d, r, c.family)
    return sorted(cuts, key=key)


def _finish(inst: Instance, scen: ScenarioSet, m: MipModel, report: SolveReport,
            oracle: RecourseOracle) -> Schedule | None:
    if report.x is None:
        return None
    sched = schedule_from_room_solution(inst, m, report.x)
    sched.expected_cancellation_cost = expected_cancellation(oracle, sched)
    report.extra["exact_objective"] = sched.objective
    report.extra["operational_cost"] = sched.operational_cost
    report.extra["expected_cancellation_cost"] = sched.expected_cancellation_cost
    return sched


def _engine_options(cfg: AlgoConfig, warm: np.ndarray | None) -> SolveOptions:
    return SolveOptions(gap=cfg.gap, node_limit=cfg.node_limit, time_limit=cfg.time_limit,
                        warm_start=warm, trace=cfg.trace)


def solve_two_stage(inst: Instance, scen: ScenarioSet, cfg: AlgoConfig | None = None
                    ) -> tuple[SolveReport, Schedule | None]:
    cfg = cfg or AlgoConfig()
    cfg.validate()
    m = build_two_stage_master(inst, scen)
    oracle = RecourseOracle(inst, scen)
    cbs = TwoStageCallbacks(inst, scen, m, cfg, oracle)
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
        assignment, rooms = _reorder_rooms(inst, sched.assignment, sched.open_rooms)
        sched = Schedule(assignment, sorted(sched.postponed), rooms)
        vec = schedule_to_master(inst, m, sched, oracle)
        if cfg.initial_cuts:
            initial.extend(cbs.cuts_at(vec, qhat=0.0)[0])
        if m.objective(vec) < best - 1e-9:
            warm, best = vec, m.objective(vec)
    if cfg.relaxation_bounds:
        initial.extend(relaxation_bounds(inst, scen, m))
    report = solve(m, cbs.lazy, cbs.user if cfg.user_cuts else None, _engine_options(cfg, warm), initial)
    report.extra["ffd"] = ffd_status
    sched = _finish(inst, scen, m, report, oracle)
    return report, sched


def solve_de(inst: Instance, scen: ScenarioSet, cfg: AlgoConfig | None = None
             ) -> tuple[SolveReport, Schedule | None]:
    """Deterministic equivalent solved directly by the engine."""
    cfg = cfg or AlgoConfig()
    m = build_de(inst, scen)
    report = solve(m, opts=_engine_options(cfg, None))
    sched = _finish(inst, scen, m, report, RecourseOracle(inst, scen))
    return report, sched
