from dataclasses import replace

import numpy as np
import pytest

from oracles import enumerate_optimum, small_instance
from sdors.model import Schedule, ScenarioSet, ValidationError
from sdors.sampling import GenConfig, generate_instance, with_duration_sd
from sdors.saa import (
    SaaConfig,
    evaluate_schedule,
    normal_interval,
    saa_bounds,
    scenario_costs,
    sensitivity_case,
    solve_deterministic,
    t_interval,
    worst_case_gap,
)
from sdors.two_stage import AlgoConfig

# (|S|, LB mean, LB half-width, UB mean, UB half-width, reference gap %)
REFERENCE_ROWS = [
    (25, -127363, 239.67, -124145, 125.00, 2.81),
    (50, -126633, 151.93, -124577, 109.22, 1.83),
    (75, -126175, 131.77, -124405, 112.17, 1.59),
    (100, -125967, 133.24, -124510, 83.22, 1.33),
]


@pytest.mark.parametrize("row", REFERENCE_ROWS, ids=lambda r: f"S{r[0]}")
def test_worst_case_gap_reproduces_reference_rows(row):
    _, lb, lbw, ub, ubw, pct = row
    assert abs(100 * worst_case_gap(lb, lbw, ub, ubw) - pct) <= 0.01


def test_intervals():
    mean, w = t_interval([1.0, 2.0, 3.0])
    assert mean == 2.0 and w == pytest.approx(4.302652729911275 * 1.0 / np.sqrt(3))
    assert t_interval([5.0]) == (5.0, 0.0)
    assert normal_interval([1.0, 3.0])[1] == pytest.approx(1.959963984540054 * np.sqrt(2) / np.sqrt(2))


def test_evaluate_empty_schedule():
    inst = generate_instance(GenConfig(patients=4, seed=1))
    sched = Schedule(assignment={}, postponed=[0, 1, 2, 3], open_rooms=[])
    rep = evaluate_schedule(inst, sched, 20, 0)
    assert rep.cancellation_rate == 0.0 and rep.utilization == 0.0 and rep.scheduled == 0


def test_evaluate_single_fitting_patient():
    inst = with_duration_sd(small_instance(1, 1, 2, 2, rho=[1], alpha=[60], B=480), 0.0)
    sched = Schedule(assignment={0: (0, 0, 0)}, postponed=[], open_rooms=[(0, 0, 0)])
    rep = evaluate_schedule(inst, sched, 10, 3)
    assert rep.cancellation_rate == 0.0
    assert rep.utilization == pytest.approx(160.0 / (480.0 * 2 * 2))
    assert rep.opened_utilization == pytest.approx(160.0 / 480.0)
    with pytest.raises(ValidationError):
        evaluate_schedule(inst, sched, 0, 3)


def test_scenario_costs_cancel_overflow():
    inst = small_instance(2, 1, 1, 1, rho=[1, 1], alpha=[60, 60], B=300)
    sched = Schedule(assignment={0: (0, 0, 0), 1: (0, 0, 0)}, postponed=[], open_rooms=[(0, 0, 0)])
    scen = ScenarioSet(np.array([[100, 100], [200, 200]]))
    cost = scenario_costs(inst, sched, scen)
    assert cost[0] == 0.0 and cost[1] == pytest.approx(min(inst.cancel))


def test_sensitivity_transforms():
    inst = generate_instance(GenConfig(patients=1, days=5), rho=np.array([1]), alpha=np.array([60]))
    assert inst.patients[0].cancel_penalty == 4320.0
    assert sensitivity_case(inst, 2).patients[0].cancel_penalty == pytest.approx(2880.0)
    inst = replace(inst, time_limit=np.full_like(inst.time_limit, 480.0))
    assert np.all(sensitivity_case(inst, 3).time_limit == 240.0)
    assert sensitivity_case(inst, 1).duration.sd == 60.0
    with pytest.raises(ValidationError):
        sensitivity_case(inst, 4)


@pytest.mark.parametrize("seed", range(3))
def test_deterministic_model_matches_enumeration(seed):
    inst = generate_instance(GenConfig(patients=8, hospitals=1, days=2, rooms=2, seed=seed))
    # overflowing nominal rooms become prohibitively expensive in the enumeration
    strict = replace(inst, patients=[replace(p, cancel_penalty=1e9) for p in inst.patients])
    report, sched = solve_deterministic(inst, AlgoConfig(gap=0.0))
    want = enumerate_optimum(strict, ScenarioSet(np.full((1, 8), 160)))
    assert report.objective == pytest.approx(want, abs=1e-6)
    sched.validate(inst)
    for pats in sched.room_patients().values():
        assert 160 * len(pats) <= 480


def test_saa_small_run_is_consistent_and_deterministic():
    inst = generate_instance(GenConfig(patients=5, hospitals=1, days=2, rooms=2, seed=4))
    cfg = SaaConfig(3, replications=4, select_scenarios=50, ub_scenarios=300, algo="two-bdd", gap=0.0, seed=1)
    a = saa_bounds(inst, cfg)
    b = saa_bounds(inst, cfg)
    assert a.to_dict() == b.to_dict()
    assert len(a.lb_values) == 4 and not a.failures
    assert a.lb_mean - 3 * a.lb_width <= a.ub_mean + 3 * a.ub_width
    assert a.gap == pytest.approx(worst_case_gap(a.lb_mean, a.lb_width, a.ub_mean, a.ub_width))
    assert a.select_values[a.chosen] == min(a.select_values)


def test_saa_config_validation():
    with pytest.raises(ValidationError):
        SaaConfig(0).validate()
    with pytest.raises(ValidationError):
        SaaConfig(5, algo="nope").validate()
