import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_knapsack
from sdors.bdd import (
    bdd_benders_cut,
    build_diagram,
    dual_residuals,
    extract_duals,
    knapsack_lp_duals,
    shortest_path,
    solve_knapsack,
)
from sdors.lp import OPTIMAL, LpModel, solve_lp
from sdors.model import SubproblemSpec

EXAMPLE = SubproblemSpec((0, 1, 2, 3), (2, 1, 3, 3), 5.0, (4.0, 1.0, 3.0, 8.0))


def random_spec(rng, n_max=8):
    n = int(rng.integers(1, n_max + 1))
    weights = tuple(int(w) for w in rng.integers(1, 10, n))
    values = tuple(float(v) for v in rng.integers(1, 20, n))
    cap = float(rng.integers(0, sum(weights) + 2))
    return SubproblemSpec(tuple(range(n)), weights, cap, values)


def path_lp(dia, mask):
    """Shortest-path LP over the diagram arcs, blocked one-arcs bounded by an explicit f <= 0 row."""
    arcs = dia.arcs()
    n_nodes = dia.n_nodes
    A = np.zeros((n_nodes, len(arcs)))
    for a, (i, j, _, _) in enumerate(arcs):
        A[i, a] += 1.0
        A[j, a] -= 1.0
    b = np.zeros(n_nodes)
    b[dia.root], b[dia.terminal] = 1.0, -1.0
    blocked = [a for a, (i, j, k, g) in enumerate(arcs) if g != 0.0 and not mask[dia.patients[k]]]
    rows = np.zeros((len(blocked), len(arcs)))
    for r, a in enumerate(blocked):
        rows[r, a] = 1.0
    c = np.array([g for *_, g in arcs])
    model = LpModel.from_constraints(c, np.vstack([A, rows]), ["="] * n_nodes + ["<="] * len(blocked),
                                     np.concatenate([b, np.zeros(len(blocked))]))
    return solve_lp(model)


def check_dual_feasible(dia, duals):
    pi, xi = duals.pi, duals.xi
    assert pi[dia.terminal] == 0.0
    for i, j, k, g in dia.arcs():
        slack = g + pi[j] - pi[i] + (xi[i] if g != 0.0 and not duals.usable[k] else 0.0)
        assert slack >= -1e-9
    assert np.all(xi >= 0.0)


# ---------------------------------------------------------------- construction


def test_example_path_and_labels():
    dia = build_diagram(EXAMPLE, "natural")
    nodes = dia.path_nodes([1, 1, 0, 0])
    assert [dia.label(v) for v in nodes] == ["o", "b", "d", "f", "t"]
    choice = [1, 1, 0, 0]
    arcs = {(i, j, k, g != 0.0): g for i, j, k, g in dia.arcs()}
    length = sum(arcs[(nodes[k], nodes[k + 1], k, bool(take))] for k, take in enumerate(choice))
    assert length == -5.0


def test_example_exact_values():
    dia = build_diagram(EXAMPLE, "natural")
    assert shortest_path(dia) == (-12.0, (0, 3))
    assert shortest_path(dia, [1, 1, 1, 0]) == (-7.0, (0, 2))
    value, keep = solve_knapsack(EXAMPLE)
    assert value == 4.0 and keep == (0, 3)
    assert brute_knapsack(EXAMPLE.values, EXAMPLE.weights, 5, [0, 1, 2]) == (1.0, (0, 2))


def test_empty_patient_set():
    dia = build_diagram(SubproblemSpec((), (), 5.0, ()))
    assert dia.n_layers == 0 and dia.root == dia.terminal
    assert shortest_path(dia) == (0.0, ())


def test_all_overweight_has_only_zero_arcs():
    spec = SubproblemSpec((0, 1), (6, 7), 5.0, (4.0, 1.0))
    dia = build_diagram(spec)
    assert all(g == 0.0 for *_, g in dia.arcs())
    assert shortest_path(dia)[0] == 0.0 and solve_knapsack(spec)[0] == 5.0


def test_single_overweight_patient_is_cancelled():
    assert solve_knapsack(SubproblemSpec((3,), (500,), 480.0, (70.0,))) == (70.0, ())


def test_diagram_is_reduced():
    rng = np.random.default_rng(1)
    for _ in range(30):
        dia = build_diagram(random_spec(rng))
        for ids in dia.layer_nodes[:-1]:
            children = {(int(dia.zero[i]), int(dia.one[i])) for i in ids}
            assert len(children) == len(ids)  # no two nodes share both children


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**31))
def test_shortest_path_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng)
    mask = rng.random(len(spec.patients)) < 0.7
    sel = [i for i in range(len(spec.patients)) if mask[i]]
    for ordering in ("weight", "natural"):
        dia = build_diagram(spec, ordering)
        value, keep = shortest_path(dia, mask)
        want, _ = brute_knapsack(spec.values, spec.weights, spec.capacity, sel)
        assert sum(spec.values[i] for i in sel) + value == pytest.approx(want)
        assert sum(spec.weights[i] for i in keep) <= spec.capacity
        assert set(keep) <= set(sel)


# ---------------------------------------------------------------- duals


def test_unblocked_duals_are_zero_penalty():
    dia = build_diagram(EXAMPLE, "natural")
    duals = extract_duals(dia)
    assert np.all(duals.xi == 0.0) and duals.pi_root == -12.0


def test_example_blocked_duals():
    dia = build_diagram(EXAMPLE, "natural")
    mask = [1, 1, 1, 0]
    duals = extract_duals(dia, mask)
    assert duals.pi_root == -7.0
    assert dual_residuals(dia, duals) == (0.0, 0.0)
    assert path_lp(dia, mask).objective == pytest.approx(-7.0)


def test_two_path_diagram_penalty_equals_cost():
    dia = build_diagram(SubproblemSpec((0,), (3,), 5.0, (9.0,)))
    duals = extract_duals(dia, [0])
    assert duals.patient_penalty(dia) == {0: 9.0}


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_duals_match_path_lp(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng)
    dia = build_diagram(spec)
    mask = rng.random(len(spec.patients)) < 0.6  # keyed by patient id
    duals = extract_duals(dia, mask)
    worst, gap = dual_residuals(dia, duals)
    assert worst <= 1e-9 and gap <= 1e-9
    check_dual_feasible(dia, duals)
    sol = path_lp(dia, mask)
    assert sol.status == OPTIMAL
    assert duals.pi_root == pytest.approx(sol.objective, abs=1e-6)


# ---------------------------------------------------------------- cuts


def test_example_cut_tight_at_point():
    dia = build_diagram(EXAMPLE, "natural")
    cut = bdd_benders_cut(dia, extract_duals(dia), 0, {p: p + 1 for p in range(4)}, ())
    x = np.array([0.0, 1, 1, 1, 1])
    assert -cut.activity(x) + x[0] + cut.rhs == 4.0  # right side at x-hat
    assert cut.violation(np.array([4.0, 1, 1, 1, 1])) == 0.0


def test_empty_cut_is_nonnegativity():
    dia = build_diagram(SubproblemSpec((), (), 5.0, ()))
    cut = bdd_benders_cut(dia, extract_duals(dia), 0, {}, ())
    assert cut.cols.tolist() == [0] and cut.rhs == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_bdd_cut_valid_everywhere_and_tight(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, 7)
    n = len(spec.patients)
    dia = build_diagram(spec)
    xhat = rng.random(n) < 0.6
    duals = extract_duals(dia, xhat)
    cut = bdd_benders_cut(dia, duals, 0, {p: p + 1 for p in range(n)}, ())
    for bits in range(1 << n):
        x = np.array([(bits >> p) & 1 for p in range(n)], dtype=float)
        q, _ = brute_knapsack(spec.values, spec.weights, spec.capacity, np.flatnonzero(x))
        assert cut.violation(np.concatenate([[q], x])) <= 1e-6
    q_hat, _ = brute_knapsack(spec.values, spec.weights, spec.capacity, np.flatnonzero(xhat))
    assert cut.violation(np.concatenate([[q_hat - 1e-3], xhat.astype(float)])) > 0


# ---------------------------------------------------------------- knapsack LP


def test_knapsack_lp_example():
    lp = knapsack_lp_duals(EXAMPLE.values, EXAMPLE.weights, 5.0)
    assert lp.objective == pytest.approx(4.0) and lp.saved == pytest.approx(12.0)


def test_knapsack_lp_slack_capacity():
    lp = knapsack_lp_duals([3.0, 2.0], [1.0, 2.0], 10.0)
    assert lp.objective == 0.0 and lp.eta == 0.0
    assert sum((c + lp.delta[p]) for p, c in enumerate([3.0, 2.0])) + 10.0 * lp.eta == pytest.approx(0.0)


def test_knapsack_lp_single_overweight():
    lp = knapsack_lp_duals([10.0], [8.0], 6.0)
    assert lp.keep[0] == pytest.approx(0.75)
    assert lp.objective == pytest.approx(10.0 * (1 - 6 / 8))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_knapsack_lp_matches_lp_kernel(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng)
    n = len(spec.patients)
    upper = (rng.random(n) < 0.7).astype(float)
    lp = knapsack_lp_duals(spec.values, spec.weights, spec.capacity, upper)
    model = LpModel.from_constraints(-np.array(spec.values), [spec.weights], ["<="], [spec.capacity],
                                     lb=0.0, ub=upper)
    sol = solve_lp(model)
    assert -sol.objective == pytest.approx(lp.saved, abs=1e-6)
    assert lp.eta <= 0.0 and all(v <= 1e-12 for v in lp.delta.values())
    # dual feasibility of the min form and tightness of the cut at the upper bounds
    for p in range(n):
        assert -spec.values[p] - lp.eta * spec.weights[p] - lp.delta[p] >= -1e-9
    rhs = sum((spec.values[p] + lp.delta[p]) * upper[p] for p in range(n)) + spec.capacity * lp.eta
    assert rhs == pytest.approx(lp.objective, abs=1e-6)
    # validity at every binary point
    for bits in range(1 << n):
        x = np.array([(bits >> p) & 1 for p in range(n)], dtype=float)
        q, _ = brute_knapsack(spec.values, spec.weights, spec.capacity, np.flatnonzero(x))
        bound = sum((spec.values[p] + lp.delta[p]) * x[p] for p in range(n)) + spec.capacity * lp.eta
        assert bound <= q + 1e-6
