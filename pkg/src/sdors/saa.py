"""Sample average approximation bounds, Monte-Carlo schedule evaluation and sensitivity cases."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import stats

from .bdd import build_diagram, shortest_path
from .bnc import SolveOptions, SolveReport, solve
from .model import (
    Instance,
    ScenarioSet,
    Schedule,
    SubproblemSpec,
    ValidationError,
    build_deterministic_dors,
    make_patient,
    operational_cost,
    schedule_from_room_solution,
)
from .sampling import sample_scenarios, split_stream
from .three_stage import solve_three_stage
from .two_stage import AlgoConfig, ffd_initial, solve_de, solve_two_stage

Solver = Callable[[Instance, ScenarioSet, AlgoConfig], "tuple[SolveReport, Schedule | None]"]

ALGORITHMS = ("de", "two-lbbd", "two-bdd", "three")


class NoIncumbentError(RuntimeError):
    """A solve ended without any feasible schedule."""


def solver_for(name: str) -> tuple[Solver, AlgoConfig]:
    """Solver function and its base configuration for an algorithm name."""
    if name == "de":
        return solve_de, AlgoConfig()
    if name == "two-lbbd":
        return solve_two_stage, AlgoConfig(cut_family="lbbd")
    if name == "two-bdd":
        return solve_two_stage, AlgoConfig(cut_family="bdd")
    if name == "three":
        return solve_three_stage, AlgoConfig()
    raise ValidationError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")


# --------------------------------------------------------------------------
# recourse under fresh scenarios


@dataclass
class RoomOutcome:
    cost: float
    kept: tuple[int, ...]


def room_outcome(inst: Instance, hd: tuple[int, int], patients, durations: np.ndarray) -> RoomOutcome:
    """Exact cancellation for one room under one duration vector."""
    patients = tuple(sorted(patients))
    if not patients:
        return RoomOutcome(0.0, ())
    cancel = inst.cancel
    spec = SubproblemSpec(
        patients=patients,
        weights=tuple(int(durations[p]) for p in patients),
        capacity=float(np.floor(inst.time_limit[hd])),
        values=tuple(float(cancel[p]) for p in patients),
    )
    value, keep = shortest_path(build_diagram(spec, "weight"))
    return RoomOutcome(float(cancel[list(patients)].sum()) + value, keep)


def scenario_costs(inst: Instance, sched: Schedule, scen: ScenarioSet) -> np.ndarray:
    """Recourse cost of a fixed schedule under every scenario of ``scen``."""
    rooms = [(k, pats) for k, pats in sorted(sched.room_patients().items()) if pats]
    out = np.zeros(scen.count)
    for s in range(scen.count):
        T = scen.durations[s]
        out[s] = sum(room_outcome(inst, (h, d), pats, T).cost for (h, d, _), pats in rooms)
    return out


def t_interval(values) -> tuple[float, float]:
    """Mean and 95% t half-width."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    if v.size == 1:
        return float(v[0]), 0.0
    sd = float(np.std(v, ddof=1))
    return float(v.mean()), float(stats.t.ppf(0.975, v.size - 1) * sd / math.sqrt(v.size))


def normal_interval(values) -> tuple[float, float]:
    """Mean and 95% normal-approximation half-width."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return 0.0, 0.0
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return float(v.mean()), float(stats.norm.ppf(0.975) * sd / math.sqrt(v.size))


# --------------------------------------------------------------------------
# SAA


def worst_case_gap(lb_mean: float, lb_width: float, ub_mean: float, ub_width: float) -> float:
    """Pessimistic relative gap between the far edges of the two intervals."""
    low = lb_mean - lb_width
    return abs(((ub_mean + ub_width) - low) / low)


@dataclass
class SaaConfig:
    scenarios: int  # per replication
    replications: int = 10
    select_scenarios: int = 200
    ub_scenarios: int = 1000
    algo: str = "three"
    gap: float = 0.01
    time_limit: float | None = None
    seed: int = 0

    @classmethod
    def full(cls, scenarios: int, **kw) -> "SaaConfig":
        return cls(scenarios, replications=30, select_scenarios=1000, ub_scenarios=10000, **kw)

    def validate(self) -> None:
        for name in ("scenarios", "replications", "select_scenarios", "ub_scenarios"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        solver_for(self.algo)


@dataclass
class SaaReport:
    scenarios: int
    lb_values: list[float]
    lb_mean: float
    lb_width: float
    chosen: int
    select_values: list[float]
    ub_mean: float
    ub_width: float
    gap: float
    schedule: Schedule | None = None
    failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "scenarios": self.scenarios,
            "lb_values": self.lb_values,
            "lb_mean": self.lb_mean,
            "lb_width": self.lb_width,
            "chosen": self.chosen,
            "select_values": self.select_values,
            "ub_mean": self.ub_mean,
            "ub_width": self.ub_width,
            "gap": self.gap,
            "failures": self.failures,
            "schedule": self.schedule.to_dict() if self.schedule else None,
        }


def saa_bounds(inst: Instance, cfg: SaaConfig) -> SaaReport:
    cfg.validate()
    fn, base = solver_for(cfg.algo)
    algo_cfg = replace(base, gap=cfg.gap, time_limit=cfg.time_limit)
    lb_values, schedules, failures = [], [], []
    for n in range(cfg.replications):
        scen = sample_scenarios(inst, cfg.scenarios, split_stream(cfg.seed, f"saa-lb-{n}"))
        try:
            report, sched = fn(inst, scen, algo_cfg)
        except Exception as exc:  # a failed replication is dropped and reported
            failures.append(f"replication {n}: {exc}")
            continue
        if sched is None:
            failures.append(f"replication {n}: {report.termination} without incumbent")
            continue
        lb_values.append(float(report.objective))
        schedules.append(sched)
    if not schedules:
        raise NoIncumbentError("every SAA replication failed: " + "; ".join(failures))
    lb_mean, lb_width = t_interval(lb_values)
    select = sample_scenarios(inst, cfg.select_scenarios, split_stream(cfg.seed, "saa-select"))
    select_values = [s.operational_cost + float(scenario_costs(inst, s, select).mean()) for s in schedules]
    chosen = int(np.argmin(select_values))
    best = schedules[chosen]
    ub_scen = sample_scenarios(inst, cfg.ub_scenarios, split_stream(cfg.seed, "saa-ub"))
    totals = best.operational_cost + scenario_costs(inst, best, ub_scen)
    ub_mean, ub_width = t_interval(totals)
    return SaaReport(
        scenarios=cfg.scenarios,
        lb_values=lb_values,
        lb_mean=lb_mean,
        lb_width=lb_width,
        chosen=chosen,
        select_values=select_values,
        ub_mean=ub_mean,
        ub_width=ub_width,
        gap=worst_case_gap(lb_mean, lb_width, ub_mean, ub_width),
        schedule=best,
        failures=failures,
    )


# --------------------------------------------------------------------------
# evaluation


@dataclass
class EvalReport:
    cancellation_rate: float
    cancellation_width: float
    utilization: float
    utilization_width: float
    opened_utilization: float
    opened_utilization_width: float
    scheduled: int
    opened_rooms: int
    samples: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def evaluate_schedule(inst: Instance, sched: Schedule, samples: int, seed: int) -> EvalReport:
    """Cancellation and utilization rates of a fixed schedule over fresh duration samples.

    Empty schedules report zero rates.
    """
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    sched.validate(inst)
    scen = sample_scenarios(inst, samples, seed)
    B = inst.time_limit
    total_capacity = float(B.sum()) * inst.rooms_per_hospital
    opened_capacity = float(sum(B[h, d] for h, d, _ in sched.open_rooms))
    rooms = [(k, pats) for k, pats in sorted(sched.room_patients().items()) if pats]
    scheduled = len(sched.assignment)
    cancel_rate = np.zeros(samples)
    util = np.zeros(samples)
    opened_util = np.zeros(samples)
    for s in range(samples):
        T = scen.durations[s]
        cancelled, accepted = 0, 0.0
        for (h, d, _), pats in rooms:
            keep = room_outcome(inst, (h, d), pats, T).kept
            cancelled += len(pats) - len(keep)
            accepted += float(sum(T[p] for p in keep))
        cancel_rate[s] = cancelled / scheduled if scheduled else 0.0
        util[s] = accepted / total_capacity
        opened_util[s] = accepted / opened_capacity if opened_capacity > 0 else 0.0
    c_mean, c_w = normal_interval(cancel_rate)
    u_mean, u_w = normal_interval(util)
    o_mean, o_w = normal_interval(opened_util)
    return EvalReport(c_mean, c_w, u_mean, u_w, o_mean, o_w, scheduled, len(sched.open_rooms), samples)


# --------------------------------------------------------------------------
# deterministic baseline and sensitivity cases


def solve_deterministic(inst: Instance, cfg: AlgoConfig | None = None,
                        nominal: float = 160.0) -> tuple[SolveReport, Schedule | None]:
    """Schedule that fits nominal durations into every room and ignores cancellations."""
    cfg = cfg or AlgoConfig()
    cfg.validate()
    m = build_deterministic_dors(inst, nominal)
    warm = None
    if cfg.ffd:
        flat = ScenarioSet(np.full((1, inst.n_patients), int(round(nominal))))
        res = ffd_initial(inst, flat)
        if res.schedule is not None:
            warm = _room_vector(m, res.schedule)
    report = solve(m, None, None, _options(cfg, warm))
    if report.x is None:
        return report, None
    sched = schedule_from_room_solution(inst, m, report.x)
    sched.operational_cost = operational_cost(inst, sched)
    return report, sched


def _options(cfg: AlgoConfig, warm: np.ndarray | None = None) -> SolveOptions:
    return SolveOptions(gap=cfg.gap, node_limit=cfg.node_limit, time_limit=cfg.time_limit,
                        warm_start=warm, trace=cfg.trace)


def _room_vector(m, sched: Schedule) -> np.ndarray:
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
    return v


SENSITIVITY_CASES = {
    1: "duration sd 40 -> 60",
    2: "late-cancellation weights scaled to 2/3",
    3: "every session length halved",
}


def sensitivity_case(inst: Instance, case: int) -> Instance:
    if case == 1:
        return replace(inst, duration=replace(inst.duration, sd=60.0))
    if case == 2:
        k1, k2, k3, k4 = inst.kappa
        kappa = (k1, k2, k3 * 2.0 / 3.0, k4 * 2.0 / 3.0)
        patients = [make_patient(p.id, p.urgency, p.wait_days, inst.days, kappa, inst.gamma)
                    for p in inst.patients]
        return replace(inst, kappa=kappa, patients=patients)
    if case == 3:
        return replace(inst, time_limit=np.asarray(inst.time_limit) / 2.0)
    raise ValidationError(f"unknown sensitivity case {case!r}; choose 1, 2 or 3")


# --------------------------------------------------------------------------
# desk pipelines


@dataclass
class ModelComparison:
    stochastic: EvalReport
    deterministic: EvalReport
    stochastic_schedule: Schedule
    deterministic_schedule: Schedule
    stochastic_report: SolveReport
    deterministic_report: SolveReport


def compare_models(inst: Instance, scenarios: int = 10, algo: str = "three", gap: float = 0.01,
                   time_limit: float | None = None, det_time_limit: float | None = None,
                   samples: int = 1000, seed: int = 0) -> ModelComparison:
    """Solve the stochastic and nominal-duration models and evaluate both on the same fresh samples.

    The deterministic schedule is offered to the stochastic solve as a starting incumbent.
    """
    det_report, det = solve_deterministic(inst, AlgoConfig(gap=0.0, time_limit=det_time_limit))
    if det is None:
        raise NoIncumbentError(f"deterministic model stopped ({det_report.termination}) without an incumbent")
    fn, base = solver_for(algo)
    scen = sample_scenarios(inst, scenarios, split_stream(seed, "compare-solve"))
    sto_report, sto = fn(inst, scen, replace(base, gap=gap, time_limit=time_limit, starts=(det,)))
    if sto is None:
        raise NoIncumbentError(f"stochastic model stopped ({sto_report.termination}) without an incumbent")
    eval_seed = split_stream(seed, "compare-eval")
    return ModelComparison(
        stochastic=evaluate_schedule(inst, sto, samples, eval_seed),
        deterministic=evaluate_schedule(inst, det, samples, eval_seed),
        stochastic_schedule=sto,
        deterministic_schedule=det,
        stochastic_report=sto_report,
        deterministic_report=det_report,
    )


def run_sensitivity(inst: Instance, case: int, scenarios: int = 10, algo: str = "three", gap: float = 0.01,
                    time_limit: float | None = None, samples: int = 1000,
                    seed: int = 0) -> dict[str, EvalReport]:
    """Stochastic schedules for the baseline and one sensitivity case, each evaluated under its own instance."""
    fn, base = solver_for(algo)
    cfg = replace(base, gap=gap, time_limit=time_limit)
    out = {}
    for label, which in (("baseline", inst), (f"case {case}", sensitivity_case(inst, case))):
        scen = sample_scenarios(which, scenarios, split_stream(seed, "sensitivity-solve"))
        report, sched = fn(which, scen, cfg)
        if sched is None:
            raise NoIncumbentError(f"{label}: solver stopped ({report.termination}) without an incumbent")
        out[label] = evaluate_schedule(which, sched, samples, split_stream(seed, "sensitivity-eval"))
    return out
