from dataclasses import replace

import numpy as np
import pytest

from oracles import brute_knapsack, enumerate_optimum, example1_instance, small_instance
from sdors.bnc import NodeView
from sdors.model import ScenarioSet, build_two_stage_master
from sdors.recourse import RecourseOracle
from sdors.sampling import GenConfig, generate_instance, sample_scenarios
from sdors.two_stage import (
    AlgoConfig,
    TwoStageCallbacks,
    ffd_initial,
    lbbd_cut,
    relaxation_bounds,
    schedule_to_master,
    solve_de,
    solve_two_stage,
)


def tiny(seed, P=5, H=1, D=2, R=2, S=2):
    inst = generate_instance(GenConfig(patients=P, hospitals=H, days=D, rooms=R, seed=seed))
    return inst, sample_scenarios(inst, S)


# ---------------------------------------------------------------- FFD


def test_ffd_single_patient_uses_largest_suite():
    inst = small_instance(1, 2, 2, 2, rho=[2], alpha=[80], B=420)
    inst = replace(inst, time_limit=np.array([[420.0, 480.0], [450.0, 465.0]]))
    res = ffd_initial(inst, ScenarioSet(np.array([[160]])))
    assert res.schedule.assignment == {0: (0, 1, 0)} and res.schedule.open_rooms == [(0, 1, 0)]


def test_ffd_third_patient_opens_second_room():
    inst = small_instance(3, 1, 1, 2, rho=[1, 1, 1], alpha=[60, 60, 60], B=480)
    res = ffd_initial(inst, ScenarioSet(np.array([[200, 200, 200]])))
    rooms = res.schedule.room_patients()
    assert sorted(len(v) for v in rooms.values()) == [1, 2]
    assert res.schedule.open_rooms == [(0, 0, 0), (0, 0, 1)]


def test_ffd_reports_mandatory_overflow():
    inst = small_instance(2, 1, 1, 1, rho=[5, 5], alpha=[120, 120], B=480)
    res = ffd_initial(inst, ScenarioSet(np.array([[300, 300]])))
    assert res.failed and res.schedule is None


def test_ffd_is_feasible_upper_bound():
    for seed in range(20):
        inst, scen = tiny(seed, P=6, H=2, D=1)
        res = ffd_initial(inst, scen)
        res.schedule.validate(inst)
        assert res.schedule.objective >= enumerate_optimum(inst, scen) - 1e-6


# ---------------------------------------------------------------- cuts


def test_lbbd_cut_example_tight_and_valid():
    inst, scen = example1_instance()
    m = build_two_stage_master(inst, scen)
    oracle = RecourseOracle(inst, scen)
    cut = lbbd_cut(oracle, m, (0, 0, 0), 0, [0, 1, 2, 3], 4.0)
    x = np.zeros(m.n_cols)
    for p in range(4):
        x[m.col("x", 0, 0, p, 0)] = 1.0
    q = m.col("Q", 0, 0, 0, 0)
    assert cut.rhs - (cut.activity(x) - x[q]) == pytest.approx(4.0)
    for drop in range(4):
        y = x.copy()
        y[m.col("x", 0, 0, drop, 0)] = 0.0
        rhs = cut.rhs - (cut.activity(y) - y[q])
        assert rhs == pytest.approx(4.0 - inst.cancel[drop])
        rest = [p for p in range(4) if p != drop]
        assert rhs <= brute_knapsack(list(inst.cancel), [2, 1, 3, 3], 5, rest)[0] + 1e-9


def test_relaxation_bound_example():
    inst = small_instance(2, 1, 1, 1, rho=[1, 1], alpha=[60, 60], B=250)
    inst = replace(inst, patients=[replace(inst.patients[0], cancel_penalty=50.0),
                                   replace(inst.patients[1], cancel_penalty=80.0)])
    scen = ScenarioSet(np.array([[100, 200]]))
    m = build_two_stage_master(inst, scen)
    (cut,) = relaxation_bounds(inst, scen, m)
    x = np.zeros(m.n_cols)
    x[m.col("x", 0, 0, 0, 0)] = x[m.col("x", 0, 0, 1, 0)] = 1.0
    q = m.col("Q", 0, 0, 0, 0)
    bound = cut.rhs - (cut.activity(x) - x[q])
    assert bound == pytest.approx(0.4 * (300 - 250))
    assert brute_knapsack([50.0, 80.0], [100, 200], 250)[0] == 50.0
    assert cut.rhs - (cut.activity(np.zeros(m.n_cols))) < 0


def test_callbacks_no_cuts_when_q_exact():
    inst, scen = tiny(4)
    m = build_two_stage_master(inst, scen)
    cbs = TwoStageCallbacks(inst, scen, m, AlgoConfig())
    vec = schedule_to_master(inst, m, ffd_initial(inst, scen).schedule, cbs.oracle)
    cuts, full = cbs.cuts_at(vec)
    assert cuts == [] and np.allclose(full, vec)


def test_ffd_cuts_replay_deterministically():
    inst, scen = tiny(5, P=8, D=1, S=3)
    m = build_two_stage_master(inst, scen)
    cbs = TwoStageCallbacks(inst, scen, m, AlgoConfig(cut_family="both"))
    vec = schedule_to_master(inst, m, ffd_initial(inst, scen).schedule, cbs.oracle)
    a = [(c.name, c.cols.tolist(), c.coefs.tolist(), c.rhs) for c in cbs.cuts_at(vec, qhat=0.0)[0]]
    b = [(c.name, c.cols.tolist(), c.coefs.tolist(), c.rhs) for c in cbs.cuts_at(vec, qhat=0.0)[0]]
    assert a == b and a


def test_user_cuts_budget_order_and_violation():
    inst, scen = tiny(6, P=6, H=1, D=1)
    m = build_two_stage_master(inst, scen)
    cbs = TwoStageCallbacks(inst, scen, m, AlgoConfig())
    rng = np.random.default_rng(0)
    x = np.zeros(m.n_cols)
    for (h, d, p, r), j in m.index["x"].items():
        x[j] = rng.random()
    view = NodeView(x, 0.0, 0, 0, False)
    assert cbs.user(view, 0).cuts == []
    cuts = cbs.user(view, 3).cuts
    assert 0 < len(cuts) <= 3
    order = [(c.indices[3], c.indices[0], c.indices[1], c.indices[2]) for c in cuts]
    assert order == sorted(order)
    assert all(c.violation(x) > 1e-6 for c in cuts)


# ---------------------------------------------------------------- solves


def test_example1_two_stage_equals_de():
    inst, scen = example1_instance()
    de, _ = solve_de(inst, scen, AlgoConfig(gap=0.0))
    ts, sched = solve_two_stage(inst, scen, AlgoConfig(gap=0.0))
    assert ts.objective == pytest.approx(de.objective)
    assert sched.expected_cancellation_cost == pytest.approx(4.0)


@pytest.mark.parametrize("seed", range(4))
def test_families_agree_with_enumeration(seed):
    inst, scen = tiny(seed)
    want = enumerate_optimum(inst, scen)
    for family in ("lbbd", "bdd", "both"):
        rep, sched = solve_two_stage(inst, scen, AlgoConfig(cut_family=family, gap=0.0))
        assert rep.objective == pytest.approx(want, abs=1e-6)
        assert sched.objective == pytest.approx(want, abs=1e-6)


def test_de_matches_enumeration():
    for seed in range(3):
        inst, scen = tiny(seed, P=4, H=2, D=1, R=2, S=2)
        assert solve_de(inst, scen, AlgoConfig(gap=0.0))[0].objective == pytest.approx(
            enumerate_optimum(inst, scen), abs=1e-6)


def test_warm_start_toggle_keeps_objective():
    for seed in range(5):
        inst, scen = tiny(seed + 10)
        a, _ = solve_two_stage(inst, scen, AlgoConfig(gap=0.0))
        b, _ = solve_two_stage(inst, scen, AlgoConfig(gap=0.0, ffd=False))
        assert a.objective == pytest.approx(b.objective, abs=1e-6)
        ffd = ffd_initial(inst, scen).schedule
        assert a.ub_trace[0] == pytest.approx(ffd.objective)
        assert a.objective <= ffd.objective + 1e-6
        assert b.extra["ffd"] == "disabled"


def test_mandatory_overflow_without_warm_start_still_converges():
    inst = small_instance(3, 1, 1, 2, rho=[5, 5, 1], alpha=[120, 120, 60], B=480)
    scen = ScenarioSet(np.array([[479, 479, 100], [300, 300, 100]]))
    rep, sched = solve_two_stage(inst, scen, AlgoConfig(gap=0.0))
    assert rep.extra["ffd"] == "ok" and sched is not None
    assert rep.objective == pytest.approx(enumerate_optimum(inst, scen), abs=1e-6)


def test_gap_termination_reports_exact_objective():
    inst, scen = tiny(2, P=6)
    rep, sched = solve_two_stage(inst, scen, AlgoConfig(gap=0.05))
    assert rep.gap <= 0.05 + 1e-12
    assert rep.extra["exact_objective"] == pytest.approx(rep.objective, abs=1e-6)
