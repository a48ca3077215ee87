"""Decision diagrams for the cancellation knapsack.

A keep/cancel decision for each patient is a layer; a one-arc keeps the
patient (cost ``-c_p``, consumes ``T_p`` minutes) and a zero-arc cancels.
Shortest root-to-terminal paths give the maximum saved cancellation cost.

Construction is a top-down dynamic program on residual capacity followed by
bottom-up merging of nodes whose (zero-child, one-child) targets coincide.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import Cut, SubproblemSpec, make_cut

TIE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Diagram:
    """Reduced layered diagram.

    Nodes are numbered breadth-first from the root (zero child before one
    child); the terminal is the last node.  ``zero[i]``/``one[i]`` give child
    node ids (``-1`` when the arc is absent).
    """

    patients: tuple[int, ...]  # patient id of each layer
    values: np.ndarray  # cancellation cost per layer
    weights: np.ndarray  # duration per layer
    capacity: int
    layer_nodes: tuple[np.ndarray, ...]  # node ids per layer, terminal layer last
    zero: np.ndarray
    one: np.ndarray
    state: np.ndarray  # largest residual capacity represented by the node

    @property
    def n_layers(self) -> int:
        return len(self.patients)

    @property
    def n_nodes(self) -> int:
        return self.zero.size

    @property
    def root(self) -> int:
        return 0

    @property
    def terminal(self) -> int:
        return self.n_nodes - 1

    def layer_sizes(self) -> list[int]:
        return [int(a.size) for a in self.layer_nodes]

    def layer_of_node(self) -> np.ndarray:
        out = np.empty(self.n_nodes, dtype=int)
        for k, ids in enumerate(self.layer_nodes):
            out[ids] = k
        return out

    def label(self, node: int) -> str:
        """``o`` for the root, ``t`` for the terminal, then a, b, c, ... in numbering order."""
        if node == self.root:
            return "o"
        if node == self.terminal:
            return "t"
        return _alpha_label(node - 1)

    def arcs(self) -> list[tuple[int, int, int, float]]:
        """(source, target, layer, cost) for every arc."""
        out = []
        for k, ids in enumerate(self.layer_nodes[:-1]):
            for i in ids:
                out.append((int(i), int(self.zero[i]), k, 0.0))
                if self.one[i] >= 0:
                    out.append((int(i), int(self.one[i]), k, -float(self.values[k])))
        return out

    def path_nodes(self, keep: Sequence[bool]) -> list[int] | None:
        """Node sequence of the path with the given per-layer decisions, if it exists."""
        node = self.root
        seq = [node]
        for k, take in enumerate(keep):
            nxt = self.one[node] if take else self.zero[node]
            if nxt < 0:
                return None
            node = int(nxt)
            seq.append(node)
        return seq

    def to_dot(self) -> str:
        lines = ["digraph bdd {", "  rankdir=TB;"]
        for s, t, k, g in self.arcs():
            style = "solid" if g != 0.0 else "dashed"
            lines.append(
                f'  {self.label(s)} -> {self.label(t)} [style={style}, label="{g:g}"];'
            )
        lines.append("}")
        return "\n".join(lines)


def _alpha_label(i: int) -> str:
    s = ""
    i += 1
    while i > 0:
        i, rem = divmod(i - 1, 26)
        s = chr(ord("a") + rem) + s
    return s


def decreasing_weight_order(weights: Sequence[int]) -> list[int]:
    """Positions sorted by decreasing weight, ties by position."""
    return sorted(range(len(weights)), key=lambda i: (-weights[i], i))


def build_diagram(spec: SubproblemSpec, ordering: Sequence[int] | str = "weight") -> Diagram:
    """Reduced diagram for ``spec``.

    ``ordering`` is a permutation of positions in ``spec.patients``, or
    ``"weight"`` (decreasing duration) or ``"natural"``.
    """
    n = len(spec.patients)
    if isinstance(ordering, str):
        if ordering == "weight":
            order = decreasing_weight_order(spec.weights)
        elif ordering == "natural":
            order = list(range(n))
        else:
            raise ValueError(f"unknown ordering {ordering!r}")
    else:
        order = list(ordering)
        if sorted(order) != list(range(n)):
            raise ValueError("ordering must be a permutation of the patient positions")
    pats = tuple(spec.patients[i] for i in order)
    w = np.array([int(spec.weights[i]) for i in order], dtype=int)
    v = np.array([float(spec.values[i]) for i in order], dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    cap = int(np.floor(spec.capacity + 1e-9))
    if cap < 0:
        raise ValueError("capacity must be non-negative")

    # top-down reachable residual capacities per layer
    states: list[np.ndarray] = [np.array([cap])]
    for k in range(n):
        cur = states[-1]
        nxt = np.concatenate([cur, cur[cur >= w[k]] - w[k]])
        states.append(np.unique(nxt)[::-1])

    # bottom-up classes: cls[k] maps state -> class id within layer k
    cls: list[dict[int, int]] = [dict() for _ in range(n + 1)]
    cls[n] = {int(s): 0 for s in states[n]}
    children: list[list[tuple[int, int]]] = [[] for _ in range(n + 1)]
    class_state: list[list[int]] = [[] for _ in range(n + 1)]
    class_state[n] = [int(states[n].max())] if n else [cap]
    for k in range(n - 1, -1, -1):
        keys: dict[tuple[int, int], int] = {}
        for s in states[k]:
            s = int(s)
            z = cls[k + 1][s]
            o = cls[k + 1][s - int(w[k])] if s >= w[k] else -1
            key = (z, o)
            if key not in keys:
                keys[key] = len(keys)
                children[k].append(key)
                class_state[k].append(s)
            else:
                c = keys[key]
                class_state[k][c] = max(class_state[k][c], s)
            cls[k][s] = keys[key]

    # breadth-first numbering from the root
    if n == 0:
        return Diagram(
            pats, v, w, cap, (np.array([0]),), np.array([-1]), np.array([-1]), np.array([cap])
        )
    root_cls = cls[0][cap]
    ids: list[dict[int, int]] = [dict() for _ in range(n + 1)]
    ids[0][root_cls] = 0
    order_nodes: list[tuple[int, int]] = [(0, root_cls)]
    counter = 1
    layer_lists: list[list[int]] = [[0]] + [[] for _ in range(n)]
    head = 0
    while head < len(order_nodes):
        k, c = order_nodes[head]
        head += 1
        if k == n:
            continue
        zc, oc = children[k][c]
        for child in (zc, oc):
            if child < 0 or k + 1 == n:
                continue
            if child not in ids[k + 1]:
                ids[k + 1][child] = counter
                layer_lists[k + 1].append(counter)
                order_nodes.append((k + 1, child))
                counter += 1
    terminal = counter
    ids[n][0] = terminal
    layer_lists[n] = [terminal]
    N = terminal + 1
    zero = np.full(N, -1, dtype=int)
    one = np.full(N, -1, dtype=int)
    state = np.zeros(N, dtype=int)
    for k in range(n):
        for c, node in ids[k].items():
            zc, oc = children[k][c]
            zero[node] = ids[k + 1][zc]
            if oc >= 0:
                one[node] = ids[k + 1][oc]
            state[node] = class_state[k][c]
    state[terminal] = class_state[n][0]
    return Diagram(
        pats,
        v,
        w,
        cap,
        tuple(np.array(lst, dtype=int) for lst in layer_lists),
        zero,
        one,
        state,
    )


def _layer_mask(dia: Diagram, mask: Mapping[int, bool] | Sequence[bool] | None) -> np.ndarray:
    """Per-layer usability of one-arcs.  ``mask`` is keyed by patient id."""
    if mask is None:
        return np.ones(dia.n_layers, dtype=bool)
    if isinstance(mask, Mapping):
        return np.array([bool(mask.get(p, False)) for p in dia.patients], dtype=bool)
    arr = np.asarray(mask)
    return np.array([bool(arr[p] > 0.5) for p in dia.patients], dtype=bool)


def potentials(dia: Diagram, mask=None) -> np.ndarray:
    """Shortest distance from every node to the terminal over usable arcs."""
    return _potentials(dia, _layer_mask(dia, mask))


def _potentials(dia: Diagram, usable: np.ndarray) -> np.ndarray:
    pi = np.zeros(dia.n_nodes)
    for k in range(dia.n_layers - 1, -1, -1):
        ids = dia.layer_nodes[k]
        best = pi[dia.zero[ids]]
        if usable[k]:
            o = dia.one[ids]
            has = o >= 0
            if has.any():
                cand = -dia.values[k] + pi[np.where(has, o, 0)]
                best = np.where(has & (cand < best), cand, best)
        pi[ids] = best
    return pi


def shortest_path(dia: Diagram, mask=None) -> tuple[float, tuple[int, ...]]:
    """Shortest path value and keep-set (patient ids, ascending).

    Ties go to the zero-arc at the earliest layer where both continuations
    are optimal, i.e. the lexicographically smallest keep vector in layer order.
    """
    usable = _layer_mask(dia, mask)
    pi = _potentials(dia, usable)
    node = dia.root
    keep = []
    for k in range(dia.n_layers):
        z = dia.zero[node]
        o = dia.one[node]
        if usable[k] and o >= 0 and pi[node] < pi[z] - TIE_TOL:
            keep.append(dia.patients[k])
            node = o
        else:
            node = z
    return float(pi[dia.root]), tuple(sorted(keep))


@dataclass(frozen=True, eq=False)
class DiagramDuals:
    pi: np.ndarray  # node potentials, terminal pinned to 0
    xi: np.ndarray  # one-arc penalty per source node (0 where no one-arc or unblocked)
    usable: np.ndarray  # per-layer one-arc usability used to compute them

    @property
    def pi_root(self) -> float:
        return float(self.pi[0])

    def patient_penalty(self, dia: Diagram) -> dict[int, float]:
        """max over the layer's one-arcs of xi, keyed by patient id."""
        out = {}
        for k, p in enumerate(dia.patients):
            ids = dia.layer_nodes[k]
            out[p] = float(self.xi[ids].max()) if ids.size else 0.0
        return out


def extract_duals(dia: Diagram, mask=None) -> DiagramDuals:
    usable = _layer_mask(dia, mask)
    pi = _potentials(dia, usable)
    xi = np.zeros(dia.n_nodes)
    for k in range(dia.n_layers):
        if usable[k]:
            continue
        ids = dia.layer_nodes[k]
        o = dia.one[ids]
        has = o >= 0
        if not has.any():
            continue
        val = pi[ids] - pi[np.where(has, o, 0)] + dia.values[k]
        xi[ids] = np.where(has, np.maximum(0.0, val), 0.0)
    return DiagramDuals(pi, xi, usable)


def dual_residuals(dia: Diagram, duals: DiagramDuals) -> tuple[float, float]:
    """(worst dual-feasibility violation, strong-duality gap) for the path LP."""
    pi, xi = duals.pi, duals.xi
    worst = 0.0
    for k, ids in enumerate(dia.layer_nodes[:-1]):
        worst = max(worst, float(np.max(pi[ids] - pi[dia.zero[ids]], initial=0.0)))
        o = dia.one[ids]
        has = o >= 0
        if has.any():
            lhs = pi[ids[has]] - pi[o[has]] - xi[ids[has]]
            worst = max(worst, float(np.max(lhs + dia.values[k], initial=0.0)))
        worst = max(worst, float(np.max(-xi[ids], initial=0.0)))
    value = float(_potentials(dia, duals.usable)[dia.root])
    dual_obj = duals.pi_root - sum(
        float(xi[ids].sum()) for k, ids in enumerate(dia.layer_nodes[:-1]) if duals.usable[k]
    )
    return worst, abs(dual_obj - value)


def bdd_benders_cut(
    dia: Diagram,
    duals: DiagramDuals,
    q_col: int,
    x_cols: Mapping[int, int],
    indices: tuple,
    with_cost: bool = True,
    family: str = "BDD-Benders",
) -> Cut:
    """``Q >= pi_o + sum_p (c_p - max xi_p) x_p`` over the diagram's patients.

    Patients outside the diagram get coefficient 0.  With ``with_cost`` false
    the ``c_p`` term is dropped (the cut then bounds the shortest-path value
    itself, as needed for the inner theta variables).
    """
    pen = duals.patient_penalty(dia)
    coefs: dict[int, float] = {q_col: 1.0}
    for k, p in enumerate(dia.patients):
        if p not in x_cols:
            continue
        coef = (float(dia.values[k]) if with_cost else 0.0) - pen[p]
        coefs[x_cols[p]] = coefs.get(x_cols[p], 0.0) - coef
    return make_cut(coefs, ">=", duals.pi_root, family, indices)


# --------------------------------------------------------------------------
# knapsack LP relaxation


@dataclass(frozen=True)
class KnapsackLp:
    objective: float  # Q-bar LP: sum c*ub - saved
    saved: float
    delta: dict[int, float]  # per patient id
    eta: float
    keep: dict[int, float]  # fractional keep amounts


def knapsack_lp_duals(
    values: Sequence[float],
    weights: Sequence[float],
    capacity: float,
    upper: Sequence[float] | None = None,
    patients: Sequence[int] | None = None,
) -> KnapsackLp:
    """Greedy solution and duals of ``max sum c z  s.t. sum T z <= B, 0 <= z <= upper``.

    Duals follow the minimisation form ``min -sum c z``: ``eta <= 0`` on the
    capacity row and ``delta_p <= 0`` on ``z_p <= upper_p``.  Patients with a
    zero upper bound get the tightest dual-feasible ``delta_p``.
    """
    c = np.asarray(values, dtype=float)
    T = np.asarray(weights, dtype=float)
    n = c.size
    ub = np.ones(n) if upper is None else np.clip(np.asarray(upper, dtype=float), 0.0, 1.0)
    ids = list(range(n)) if patients is None else list(patients)
    ratio = np.where(T > 0, c / np.where(T > 0, T, 1.0), np.inf)
    order = sorted((i for i in range(n) if ub[i] > 0), key=lambda i: (-ratio[i], ids[i]))
    room = float(capacity)
    keep = np.zeros(n)
    eta = 0.0
    for i in order:
        if T[i] * ub[i] <= room + 1e-12:
            keep[i] = ub[i]
            room -= T[i] * ub[i]
        else:
            keep[i] = max(room, 0.0) / T[i]
            room = 0.0
            eta = -ratio[i]
            break
    delta = np.zeros(n)
    for i in range(n):
        if ub[i] <= 0:
            delta[i] = min(0.0, -c[i] - eta * T[i])
        elif keep[i] >= ub[i] - 1e-12:
            delta[i] = min(0.0, -c[i] - eta * T[i])
    saved = float(c @ keep)
    return KnapsackLp(
        objective=float(c @ ub) - saved,
        saved=saved,
        delta={ids[i]: float(delta[i]) for i in range(n)},
        eta=float(eta),
        keep={ids[i]: float(keep[i]) for i in range(n)},
    )


def solve_knapsack(spec: SubproblemSpec, ordering="weight") -> tuple[float, tuple[int, ...]]:
    """Exact Q-bar and keep-set of a cancellation knapsack via its diagram."""
    dia = build_diagram(spec, ordering)
    value, keep = shortest_path(dia)
    return spec.total_value + value, keep
