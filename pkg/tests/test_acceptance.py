"""Acceptance suite: one test per criterion, each at its stated tolerance and budget.

Criteria 6 to 8 run full SAA and evaluation pipelines at desk scale and take
several minutes each on one core.
"""
import statistics
import time
from itertools import product

import numpy as np
import pytest

from oracles import brute_knapsack, brute_mip, brute_suite_q, enumerate_optimum, random_binary_mip
from sdors.bdd import build_diagram, dual_residuals, extract_duals, shortest_path, solve_knapsack
from sdors.bnc import SolveOptions, solve
from sdors.lp import OPTIMAL, LpModel, solve_lp
from sdors.model import DurationModel, Instance, Patient, ScenarioSet, SubproblemSpec, build_two_stage_master
from sdors.recourse import RecourseOracle
from sdors.saa import SaaConfig, compare_models, run_sensitivity, saa_bounds, worst_case_gap
from sdors.sampling import GenConfig, generate_instance, sample_scenarios
from sdors.three_stage import build_lbbd_master, qlb2_bounds, solve_three_stage
from sdors.two_stage import AlgoConfig, relaxation_bounds, solve_de, solve_two_stage

TOL = 1e-6
DESK = dict(patients=12, hospitals=2, days=2, rooms=2)


def one_room_instance(values, weights, capacity):
    """Single-room instance whose cancellation knapsack is (values, weights, capacity)."""
    patients = [Patient(id=i, urgency=1, wait_days=100, sched_benefit=(-1000.0,), unsched_penalty=0.0,
                        cancel_penalty=float(v), mandatory=True, health_score=600.0)
                for i, v in enumerate(values)]
    inst = Instance(1, 1, 1, patients, [[1.0]], [[1.0]], [[float(capacity)]],
                    duration=DurationModel(mean=5.0, sd=2.0, low=1.0, high=20.0))
    return inst, ScenarioSet(np.array([list(weights)]))


def random_spec(rng, n_max=8):
    n = int(rng.integers(1, n_max + 1))
    weights = [int(w) for w in rng.integers(1, 10, n)]
    values = [float(v) for v in rng.integers(1, 20, n)]
    return values, weights, float(rng.integers(0, sum(weights) + 2))


def bits_of(n):
    for bits in range(1 << n):
        yield [p for p in range(n) if bits >> p & 1]


# ---------------------------------------------------------------- 1


def test_criterion_1_example_fidelity(criterion):
    spec = SubproblemSpec((0, 1, 2, 3), (2, 1, 3, 3), 5.0, (4.0, 1.0, 3.0, 8.0))
    best = np.inf
    for _ in range(50):
        t0 = time.perf_counter()
        value, keep = solve_knapsack(spec, "natural")
        best = min(best, time.perf_counter() - t0)
    dia = build_diagram(spec, "natural")
    nodes = dia.path_nodes([1, 1, 0, 0])
    arcs = {(i, j, k, g != 0.0): g for i, j, k, g in dia.arcs()}
    length = sum(arcs[(nodes[k], nodes[k + 1], k, bool(t))] for k, t in enumerate([1, 1, 0, 0]))
    labels = "-".join(dia.label(v) for v in nodes)
    ok = value == 4.0 and keep == (0, 3) and labels == "o-b-d-f-t" and length == -5.0 and best < 1e-3
    criterion(1, ok, f"Qbar={value} path {labels} length {length} time {1e3 * best:.3f} ms")


# ---------------------------------------------------------------- 2

SHAPES = [(1, 1, 2), (1, 2, 2), (2, 1, 2), (1, 1, 3), (1, 1, 4), (2, 2, 1), (1, 2, 1), (2, 1, 1)]


def test_criterion_2_cross_algorithm_exactness(criterion):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst, bad = 0.0, []
    exact = AlgoConfig(gap=0.0)
    for k in range(25):
        H, D, R = SHAPES[k % len(SHAPES)]
        P = int(rng.integers(4, 8))
        inst = generate_instance(GenConfig(patients=P, hospitals=H, days=D, rooms=R, seed=int(rng.integers(1 << 31))))
        scen = sample_scenarios(inst, int(rng.integers(2, 4)))
        objs = {
            "de": solve_de(inst, scen, exact)[0].objective,
            "two-lbbd": solve_two_stage(inst, scen, AlgoConfig(gap=0.0, cut_family="lbbd"))[0].objective,
            "two-bdd": solve_two_stage(inst, scen, AlgoConfig(gap=0.0, cut_family="bdd"))[0].objective,
            "three": solve_three_stage(inst, scen, exact)[0].objective,
            "enum": enumerate_optimum(inst, scen),
        }
        spread = max(objs.values()) - min(objs.values())
        worst = max(worst, spread)
        if spread > TOL:
            bad.append((k, objs))
    elapsed = time.perf_counter() - t0
    criterion(2, not bad and elapsed < 300,
              f"25 instances, max spread {worst:.2e}, {len(bad)} mismatches, {elapsed:.0f} s")


# ---------------------------------------------------------------- 3


def test_criterion_3_cut_validity(criterion):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(200):
        values, weights, cap = random_spec(rng)
        n = len(values)
        inst, scen = one_room_instance(values, weights, cap)
        oracle = RecourseOracle(inst, scen)
        x_cols = {p: p + 1 for p in range(n)}
        exact = {tuple(S): brute_knapsack(values, weights, cap, S)[0] for S in bits_of(n)}
        phat = [p for p in range(n) if rng.random() < 0.6]
        cuts = [oracle.lbbd_cut(0, x_cols, phat, exact[tuple(phat)], (0,)),
                oracle.bdd_cut(0, x_cols, (0, 0), 0, phat, (0,))]
        for S, q in exact.items():
            v = np.zeros(n + 1)
            v[0] = q
            v[[p + 1 for p in S]] = 1.0
            worst = max(worst, *(c.violation(v) for c in cuts))
    # relaxation bound on single rooms
    for _ in range(100):
        inst = generate_instance(GenConfig(patients=int(rng.integers(2, 9)), hospitals=1, days=1, rooms=1,
                                           seed=int(rng.integers(1 << 31))))
        scen = sample_scenarios(inst, 2)
        m = build_two_stage_master(inst, scen)
        S = [p for p in range(inst.n_patients) if rng.random() < 0.7]
        v = np.zeros(m.n_cols)
        for p in S:
            v[m.col("x", 0, 0, p, 0)] = 1.0
        cap = float(np.floor(inst.time_limit[0, 0]))
        for s in range(scen.count):
            v[m.col("Q", 0, 0, 0, s)] = brute_knapsack(inst.cancel, scen.durations[s], cap, S)[0]
        worst = max(worst, *(c.violation(v) for c in relaxation_bounds(inst, scen, m)))
    # suite-level bound
    for _ in range(100):
        inst = generate_instance(GenConfig(patients=int(rng.integers(2, 7)), hospitals=1, days=1, rooms=2,
                                           seed=int(rng.integers(1 << 31))))
        scen = sample_scenarios(inst, 2)
        m = build_lbbd_master(inst, scen)
        S = [p for p in range(inst.n_patients) if rng.random() < 0.7]
        y = int(rng.integers(1, 3))
        v = np.zeros(m.n_cols)
        for p in S:
            v[m.col("x", 0, 0, p)] = 1.0
        v[m.col("u", 0, 0)], v[m.col("y", 0, 0)] = 1.0, float(y)
        v[m.col("Q", 0, 0)] = brute_suite_q(inst, scen, (0, 0), S, y)
        worst = max(worst, *(c.violation(v) for c in qlb2_bounds(inst, scen, m)))
    criterion(3, worst <= TOL, f"max violation {worst:.2e} over 200 specs and 2x100 assignments")


# ---------------------------------------------------------------- 4


def path_lp(dia, mask):
    arcs = dia.arcs()
    A = np.zeros((dia.n_nodes, len(arcs)))
    for a, (i, j, _, _) in enumerate(arcs):
        A[i, a] += 1.0
        A[j, a] -= 1.0
    b = np.zeros(dia.n_nodes)
    b[dia.root], b[dia.terminal] = 1.0, -1.0
    ub = np.array([0.0 if g != 0.0 and not mask[dia.patients[k]] else np.inf for _, _, k, g in arcs])
    return solve_lp(LpModel.from_constraints([g for *_, g in arcs], A, ["="] * dia.n_nodes, b, lb=0.0, ub=ub))


def test_criterion_4_duality(criterion):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        values, weights, cap = random_spec(rng)
        dia = build_diagram(SubproblemSpec(tuple(range(len(values))), tuple(weights), cap, tuple(values)))
        mask = rng.random(len(values)) < 0.6
        duals = extract_duals(dia, mask)
        feas, strong = dual_residuals(dia, duals)
        sol = path_lp(dia, mask)
        assert sol.status == OPTIMAL
        worst = max(worst, feas, strong, abs(sol.objective - duals.pi_root),
                    abs(shortest_path(dia, mask)[0] - duals.pi_root))
    criterion(4, worst <= TOL, f"max discrepancy {worst:.2e} on 100 diagrams")


# ---------------------------------------------------------------- 5


def test_criterion_5_gap_arithmetic(criterion):
    rows = [(-127363, 239.67, -124145, 125.00, 2.81), (-126633, 151.93, -124577, 109.22, 1.83),
            (-126175, 131.77, -124405, 112.17, 1.59), (-125967, 133.24, -124510, 83.22, 1.33)]
    got = [100 * worst_case_gap(*r[:4]) for r in rows]
    err = max(abs(g - r[4]) for g, r in zip(got, rows))
    criterion(5, err <= 0.01, "gaps " + ", ".join(f"{g:.3f}%" for g in got) + f" (max error {err:.4f} pp)")


# ---------------------------------------------------------------- 6


def test_criterion_6_saa_trend(criterion):
    inst = generate_instance(GenConfig(seed=0, **DESK))
    t0 = time.perf_counter()
    medians = {}
    for S in (5, 10, 20):
        gaps = [saa_bounds(inst, SaaConfig(S, time_limit=6.0, seed=seed)).gap for seed in range(3)]
        medians[S] = statistics.median(gaps)
    elapsed = time.perf_counter() - t0
    ok = medians[5] >= medians[10] >= medians[20] and elapsed <= 900
    criterion(6, ok, "median gaps " + ", ".join(f"|S|={S}: {100 * g:.2f}%" for S, g in medians.items())
              + f", {elapsed:.0f} s")


# ---------------------------------------------------------------- 7


def test_criterion_7_model_comparison(criterion):
    t0 = time.perf_counter()
    lines, ok = [], True
    for seed in range(5):
        inst = generate_instance(GenConfig(seed=seed, **DESK))
        cmp = compare_models(inst, time_limit=120.0, det_time_limit=30.0, seed=seed)
        sto, det = cmp.stochastic, cmp.deterministic
        row_ok = sto.cancellation_rate < det.cancellation_rate and sto.utilization > det.utilization
        ok &= row_ok
        lines.append(f"seed {seed} canc {sto.cancellation_rate:.3f}/{det.cancellation_rate:.3f} "
                     f"util {sto.utilization:.3f}/{det.utilization:.3f}{'' if row_ok else ' (x)'}")
    elapsed = time.perf_counter() - t0
    criterion(7, ok and elapsed <= 1200, "stochastic/deterministic " + "; ".join(lines) + f"; {elapsed:.0f} s")


# ---------------------------------------------------------------- 8


def test_criterion_8_sensitivity(criterion):
    inst = generate_instance(GenConfig(seed=0, **DESK))
    t0 = time.perf_counter()
    two = run_sensitivity(inst, 2, time_limit=90.0)
    three = run_sensitivity(inst, 3, time_limit=90.0)
    elapsed = time.perf_counter() - t0
    base = two["baseline"].cancellation_rate
    c2, c3 = two["case 2"].cancellation_rate, three["case 3"].cancellation_rate
    ok = c2 > base and c3 < base and elapsed <= 900
    criterion(8, ok, f"cancellation baseline {base:.4f}, case 2 {c2:.4f}, case 3 {c3:.4f}; {elapsed:.0f} s")


# ---------------------------------------------------------------- 9


def test_criterion_9_engine_soundness(criterion):
    rng = np.random.default_rng(9)
    wrong = 0
    for _ in range(100):
        m = random_binary_mip(rng, 14)
        want = brute_mip(m)
        rep = solve(m, None, None, SolveOptions(gap=0.0))
        if want is None:
            wrong += rep.termination != "infeasible"
        else:
            wrong += rep.termination != "gap" or abs(rep.objective - want) > TOL
    inst = generate_instance(GenConfig(patients=6, hospitals=1, days=2, rooms=2, seed=9))
    scen = sample_scenarios(inst, 3)
    reports = [solve_three_stage(inst, scen, AlgoConfig(gap=0.0))[0].to_json(include_timing=False)
               for _ in range(2)]
    reports += [solve_two_stage(inst, scen, AlgoConfig(gap=0.0))[0].to_json(include_timing=False)
                for _ in range(2)]
    same = reports[0] == reports[1] and reports[2] == reports[3]
    criterion(9, wrong == 0 and same, f"{100 - wrong}/100 MIPs match brute force; identical reports: {same}")
