"""Domain data, linear model containers and the MIP builders for SDORS.

All models minimise.  Columns are laid out as u, y, x, w, then the recourse
block (z, Q, theta or g), each enumerated in lexicographic (h, d, p, r, s)
order, so identical inputs always produce identical models.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .lp import LpModel

FEAS_TOL = 1e-6

BINARY = "binary"
INTEGER = "integer"
CONTINUOUS = "continuous"


class ValidationError(ValueError):
    """Invalid instance, scenario set or schedule."""


# --------------------------------------------------------------------------
# domain data


@dataclass(frozen=True)
class DurationModel:
    """Lognormal surgery durations (untruncated moments) truncated to [low, high]."""

    mean: float = 160.0
    sd: float = 40.0
    low: float = 45.0
    high: float = 480.0


@dataclass(frozen=True)
class Patient:
    id: int
    urgency: int
    wait_days: int
    sched_benefit: tuple[float, ...]
    unsched_penalty: float
    cancel_penalty: float
    mandatory: bool
    health_score: float


def make_patient(
    pid: int, rho: int, alpha: int, days: int, kappa: Sequence[float], gamma: float
) -> Patient:
    """Patient with all costs derived from urgency ``rho`` and waiting days ``alpha``."""
    k1, k2, k3, k4 = kappa
    omega = float((alpha - days) * rho)
    mandatory = omega >= gamma
    slack = days + 1 - alpha
    return Patient(
        id=pid,
        urgency=rho,
        wait_days=alpha,
        sched_benefit=tuple(float(k1 * rho * (d - alpha)) for d in range(1, days + 1)),
        unsched_penalty=float(k2 * rho * slack),
        cancel_penalty=float((k4 if mandatory else k3) * rho * slack),
        mandatory=mandatory,
        health_score=omega,
    )


@dataclass(frozen=True, eq=False)
class Instance:
    hospitals: int
    days: int
    rooms_per_hospital: int
    patients: Sequence[Patient]
    suite_open_cost: np.ndarray  # G[h, d]
    room_open_cost: np.ndarray  # F[h, d]
    time_limit: np.ndarray  # B[h, d]
    gamma: float = 500.0
    kappa: tuple[float, float, float, float] = (50.0, -5.0, -80.0, -100.0)
    duration: DurationModel = field(default_factory=DurationModel)
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "patients", tuple(self.patients))
        for name in ("suite_open_cost", "room_open_cost", "time_limit"):
            arr = np.array(getattr(self, name), dtype=float).reshape(self.hospitals, self.days)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "kappa", tuple(float(k) for k in self.kappa))

    # convenient vector views
    @property
    def n_patients(self) -> int:
        return len(self.patients)

    @property
    def cancel(self) -> np.ndarray:
        return np.array([p.cancel_penalty for p in self.patients])

    @property
    def unsched(self) -> np.ndarray:
        return np.array([p.unsched_penalty for p in self.patients])

    @property
    def sched(self) -> np.ndarray:
        """``sched[d, p]`` benefit (negative)."""
        return np.array([p.sched_benefit for p in self.patients]).T.reshape(self.days, -1)

    @property
    def mandatory(self) -> np.ndarray:
        return np.array([p.mandatory for p in self.patients], dtype=bool)

    def suites(self) -> list[tuple[int, int]]:
        return list(product(range(self.hospitals), range(self.days)))

    def rooms(self) -> list[tuple[int, int, int]]:
        return list(product(range(self.hospitals), range(self.days), range(self.rooms_per_hospital)))

    def validate(self) -> None:
        for name in ("hospitals", "days", "rooms_per_hospital"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.n_patients < 1:
            raise ValidationError("patients must be non-empty")
        for name in ("suite_open_cost", "room_open_cost", "time_limit"):
            if np.any(getattr(self, name) <= 0):
                raise ValidationError(f"{name} must be positive")
        for i, p in enumerate(self.patients):
            if p.id != i:
                raise ValidationError(f"patients[{i}].id must equal its position")
            if len(p.sched_benefit) != self.days:
                raise ValidationError(f"patients[{i}].sched_benefit must have length {self.days}")
            if p.cancel_penalty < 0 or p.unsched_penalty < 0:
                raise ValidationError(f"patients[{i}] penalties must be non-negative")
            if p.mandatory != (p.health_score >= self.gamma):
                raise ValidationError(f"patients[{i}].mandatory disagrees with health_score")


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    durations: np.ndarray  # T[s, p] integer minutes
    seed: int = 0

    def __post_init__(self) -> None:
        arr = np.array(self.durations, dtype=int)
        if arr.ndim != 2:
            raise ValidationError("durations must be a |S| x |P| matrix")
        arr.setflags(write=False)
        object.__setattr__(self, "durations", arr)

    @property
    def count(self) -> int:
        return self.durations.shape[0]

    def validate(self, inst: Instance, low: float | None = None, high: float | None = None) -> None:
        if self.durations.shape[1] != inst.n_patients:
            raise ValidationError("durations must have one column per patient")
        if self.count < 1:
            raise ValidationError("need at least one scenario")
        low = inst.duration.low if low is None else low
        high = inst.duration.high if high is None else high
        if np.any(self.durations < low) or np.any(self.durations > high):
            raise ValidationError(f"durations must lie in [{low}, {high}]")

    def subset(self, rows: Iterable[int]) -> "ScenarioSet":
        return ScenarioSet(self.durations[list(rows)], self.seed)


# --------------------------------------------------------------------------
# JSON document


def document_to_dict(inst: Instance, scen: ScenarioSet | None = None) -> dict:
    d = inst.duration
    doc = {
        "meta": {
            "hospitals": inst.hospitals,
            "days": inst.days,
            "rooms_per_hospital": inst.rooms_per_hospital,
            "patients": inst.n_patients,
            "scenarios": 0 if scen is None else scen.count,
            "seed": inst.seed,
            "scenario_seed": None if scen is None else scen.seed,
            "kappa": list(inst.kappa),
            "gamma": inst.gamma,
            "duration": {"mean": d.mean, "sd": d.sd, "low": d.low, "high": d.high},
        },
        "hospitals": {
            "G": inst.suite_open_cost.tolist(),
            "F": inst.room_open_cost.tolist(),
            "B": inst.time_limit.tolist(),
        },
        "patients": [
            {
                "id": p.id,
                "rho": p.urgency,
                "alpha": p.wait_days,
                "omega": p.health_score,
                "mandatory": p.mandatory,
                "c_sched": list(p.sched_benefit),
                "c_unsched": p.unsched_penalty,
                "c_cancel": p.cancel_penalty,
            }
            for p in inst.patients
        ],
        "scenarios": [] if scen is None else scen.durations.tolist(),
    }
    return doc


def _require(d: Mapping, key: str, where: str):
    if key not in d:
        raise ValidationError(f"missing field {where}.{key}")
    return d[key]


def document_from_dict(doc: Mapping) -> tuple[Instance, ScenarioSet | None]:
    meta = _require(doc, "meta", "document")
    hosp = _require(doc, "hospitals", "document")
    pats = _require(doc, "patients", "document")
    dur = meta.get("duration", {})
    patients = []
    for i, rec in enumerate(pats):
        where = f"patients[{i}]"
        patients.append(
            Patient(
                id=int(_require(rec, "id", where)),
                urgency=int(_require(rec, "rho", where)),
                wait_days=int(_require(rec, "alpha", where)),
                sched_benefit=tuple(float(v) for v in _require(rec, "c_sched", where)),
                unsched_penalty=float(_require(rec, "c_unsched", where)),
                cancel_penalty=float(_require(rec, "c_cancel", where)),
                mandatory=bool(_require(rec, "mandatory", where)),
                health_score=float(_require(rec, "omega", where)),
            )
        )
    try:
        inst = Instance(
            hospitals=int(_require(meta, "hospitals", "meta")),
            days=int(_require(meta, "days", "meta")),
            rooms_per_hospital=int(_require(meta, "rooms_per_hospital", "meta")),
            patients=patients,
            suite_open_cost=_require(hosp, "G", "hospitals"),
            room_open_cost=_require(hosp, "F", "hospitals"),
            time_limit=_require(hosp, "B", "hospitals"),
            gamma=float(meta.get("gamma", 500.0)),
            kappa=tuple(meta.get("kappa", (50.0, -5.0, -80.0, -100.0))),
            duration=DurationModel(**{k: float(v) for k, v in dur.items()}),
            seed=int(meta.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed hospitals/meta arrays: {exc}") from exc
    inst.validate()
    scen = None
    rows = doc.get("scenarios") or []
    if rows:
        scen = ScenarioSet(np.array(rows, dtype=int), int(meta.get("scenario_seed") or 0))
        scen.validate(inst)
    return inst, scen


def save_document(path: str | Path, inst: Instance, scen: ScenarioSet | None = None) -> None:
    Path(path).write_text(json.dumps(document_to_dict(inst, scen), indent=1) + "\n")


def load_document(path: str | Path) -> tuple[Instance, ScenarioSet | None]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    return document_from_dict(doc)


# --------------------------------------------------------------------------
# linear model containers


@dataclass
class Row:
    cols: np.ndarray
    coefs: np.ndarray
    sense: str  # "<=", ">=", "="
    rhs: float
    name: str = ""

    def activity(self, x: np.ndarray) -> float:
        return float(self.coefs @ x[self.cols]) if self.cols.size else 0.0

    def violation(self, x: np.ndarray) -> float:
        a = self.activity(x)
        if self.sense == "<=":
            return a - self.rhs
        if self.sense == ">=":
            return self.rhs - a
        return abs(a - self.rhs)


@dataclass
class Cut(Row):
    """Inequality emitted by a decomposition, tagged with its family and origin."""

    family: str = ""
    indices: tuple = ()
    key: tuple | None = None

    def __post_init__(self) -> None:
        self.cols = np.asarray(self.cols, dtype=int)
        self.coefs = np.asarray(self.coefs, dtype=float)
        if not self.name:
            self.name = f"{self.family}{list(self.indices)}"


def make_cut(coefs: Mapping[int, float], sense: str, rhs: float, family: str, indices: tuple,
             key: tuple | None = None) -> Cut:
    """Merge duplicate columns, drop zero coefficients and sort columns."""
    items = sorted((int(c), float(v)) for c, v in coefs.items() if v != 0.0)
    cols = np.array([c for c, _ in items], dtype=int)
    vals = np.array([v for _, v in items], dtype=float)
    return Cut(cols, vals, sense, float(rhs), family=family, indices=tuple(indices), key=key)


class MipModel:
    """Sparse MIP: variables with kinds/bounds/costs, rows, and symbol index maps."""

    def __init__(self) -> None:
        self.names: list[str] = []
        self.kinds: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.obj: list[float] = []
        self.rows: list[Row] = []
        self.index: dict[str, dict[tuple, int]] = {}
        self.objective_offset = 0.0

    @property
    def n_cols(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def add_var(self, symbol: str, idx: tuple, kind: str, lb: float, ub: float, obj: float) -> int:
        j = len(self.names)
        self.names.append(f"{symbol}[{','.join(map(str, idx))}]")
        self.kinds.append(kind)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.obj.append(float(obj))
        self.index.setdefault(symbol, {})[tuple(idx)] = j
        return j

    def col(self, symbol: str, *idx) -> int:
        return self.index[symbol][tuple(idx)]

    def has(self, symbol: str, *idx) -> bool:
        return tuple(idx) in self.index.get(symbol, {})

    def add_row(self, coefs: Mapping[int, float], sense: str, rhs: float, name: str = "") -> int:
        items = sorted((int(c), float(v)) for c, v in coefs.items() if v != 0.0)
        self.rows.append(
            Row(
                np.array([c for c, _ in items], dtype=int),
                np.array([v for _, v in items], dtype=float),
                sense,
                float(rhs),
                name,
            )
        )
        return len(self.rows) - 1

    def integer_mask(self) -> np.ndarray:
        return np.array([k != CONTINUOUS for k in self.kinds], dtype=bool)

    def objective(self, x: np.ndarray) -> float:
        return float(np.asarray(self.obj) @ x) + self.objective_offset

    def row_matrix(self, rows: Sequence[Row] | None = None) -> sp.csr_matrix:
        rows = self.rows if rows is None else rows
        data, ind, ptr = [], [], [0]
        for r in rows:
            ind.extend(r.cols.tolist())
            data.extend(r.coefs.tolist())
            ptr.append(len(ind))
        return sp.csr_matrix((data, ind, ptr), shape=(len(rows), self.n_cols))

    def to_lp(self) -> LpModel:
        """Continuous relaxation."""
        lo = np.array([r.rhs if r.sense in (">=", "=") else -np.inf for r in self.rows])
        hi = np.array([r.rhs if r.sense in ("<=", "=") else np.inf for r in self.rows])
        A = self.row_matrix()
        if self.n_cols <= 2000:
            A = A.toarray()
        return LpModel(np.array(self.obj), A, lo, hi, np.array(self.lb), np.array(self.ub))

    def max_violation(self, x: np.ndarray) -> tuple[float, int]:
        """Largest row or bound violation and its row id (-1 for bounds)."""
        worst, where = 0.0, -1
        for i, r in enumerate(self.rows):
            v = r.violation(x)
            if v > worst:
                worst, where = v, i
        lb, ub = np.array(self.lb), np.array(self.ub)
        vb = max(float(np.max(lb - x, initial=0.0)), float(np.max(x - ub, initial=0.0)))
        if vb > worst:
            worst, where = vb, -1
        return worst, where


# --------------------------------------------------------------------------
# builders


def _first_stage(m: MipModel, inst: Instance, room_symmetry: bool, x_cost: np.ndarray) -> None:
    """u, y, x, w columns with constraints (assignment, y-symmetry, optional cost symmetry, links)."""
    H, D, R, P = inst.hospitals, inst.days, inst.rooms_per_hospital, inst.n_patients
    G, F = inst.suite_open_cost, inst.room_open_cost
    cancel = inst.cancel
    for h, d in product(range(H), range(D)):
        m.add_var("u", (h, d), BINARY, 0, 1, G[h, d])
    for h, d, r in product(range(H), range(D), range(R)):
        m.add_var("y", (h, d, r), BINARY, 0, 1, F[h, d])
    for h, d, p, r in product(range(H), range(D), range(P), range(R)):
        m.add_var("x", (h, d, p, r), BINARY, 0, 1, x_cost[d, p])
    for p in range(P):
        if not inst.patients[p].mandatory:
            m.add_var("w", (p,), BINARY, 0, 1, inst.patients[p].unsched_penalty)
    for p in range(P):
        coefs = {m.col("x", h, d, p, r): 1.0 for h, d, r in product(range(H), range(D), range(R))}
        if m.has("w", p):
            coefs[m.col("w", p)] = 1.0
        m.add_row(coefs, "=", 1.0, f"assign[{p}]")
    for h, d, r in product(range(H), range(D), range(1, R)):
        m.add_row({m.col("y", h, d, r): 1.0, m.col("y", h, d, r - 1): -1.0}, "<=", 0.0, f"ysym[{h},{d},{r}]")
    if room_symmetry:
        for h, d, r in product(range(H), range(D), range(1, R)):
            coefs: dict[int, float] = {}
            for p in range(P):
                coefs[m.col("x", h, d, p, r)] = cancel[p]
                coefs[m.col("x", h, d, p, r - 1)] = -cancel[p]
            m.add_row(coefs, "<=", 0.0, f"csym[{h},{d},{r}]")
    for h, d, r in product(range(H), range(D), range(R)):
        m.add_row({m.col("y", h, d, r): 1.0, m.col("u", h, d): -1.0}, "<=", 0.0, f"yu[{h},{d},{r}]")
    for h, d, p, r in product(range(H), range(D), range(P), range(R)):
        m.add_row({m.col("x", h, d, p, r): 1.0, m.col("y", h, d, r): -1.0}, "<=", 0.0, f"xy[{h},{d},{p},{r}]")


def _check(inst: Instance, scen: ScenarioSet | None) -> None:
    inst.validate()
    if scen is not None:
        scen.validate(inst)


def build_de(inst: Instance, scen: ScenarioSet) -> MipModel:
    """Deterministic equivalent over the scenario set."""
    _check(inst, scen)
    H, D, R, P, S = inst.hospitals, inst.days, inst.rooms_per_hospital, inst.n_patients, scen.count
    cancel = inst.cancel
    m = MipModel()
    _first_stage(m, inst, True, inst.sched + cancel[None, :])
    for h, d, p, r, s in product(range(H), range(D), range(P), range(R), range(S)):
        m.add_var("z", (h, d, p, r, s), BINARY, 0, 1, -cancel[p] / S)
    B = inst.time_limit
    T = scen.durations
    for h, d, r, s in product(range(H), range(D), range(R), range(S)):
        coefs = {m.col("z", h, d, p, r, s): float(T[s, p]) for p in range(P)}
        coefs[m.col("y", h, d, r)] = -B[h, d]
        m.add_row(coefs, "<=", 0.0, f"time[{h},{d},{r},{s}]")
    for h, d, p, r, s in product(range(H), range(D), range(P), range(R), range(S)):
        m.add_row({m.col("z", h, d, p, r, s): 1.0, m.col("x", h, d, p, r): -1.0}, "<=", 0.0,
                  f"zx[{h},{d},{p},{r},{s}]")
    return m


def build_two_stage_master(inst: Instance, scen: ScenarioSet) -> MipModel:
    """First-stage model with one cancellation-cost column per (h, d, r, s)."""
    _check(inst, scen)
    H, D, R, S = inst.hospitals, inst.days, inst.rooms_per_hospital, scen.count
    m = MipModel()
    _first_stage(m, inst, True, inst.sched)
    for h, d, r, s in product(range(H), range(D), range(R), range(S)):
        m.add_var("Q", (h, d, r, s), CONTINUOUS, 0, np.inf, 1.0 / S)
    return m


def build_deterministic_dors(inst: Instance, nominal_durations: Sequence[float] | float = 160.0) -> MipModel:
    """Deterministic DORS: knapsack rows on x with nominal durations and no cancellations."""
    _check(inst, None)
    H, D, R, P = inst.hospitals, inst.days, inst.rooms_per_hospital, inst.n_patients
    T = np.broadcast_to(np.asarray(nominal_durations, dtype=float), (P,))
    m = MipModel()
    _first_stage(m, inst, False, inst.sched)
    B = inst.time_limit
    for h, d, r in product(range(H), range(D), range(R)):
        coefs = {m.col("x", h, d, p, r): float(T[p]) for p in range(P)}
        coefs[m.col("y", h, d, r)] = -B[h, d]
        m.add_row(coefs, "<=", 0.0, f"time[{h},{d},{r}]")
    return m


@dataclass(frozen=True)
class SubproblemSpec:
    """Cancellation knapsack for one room and scenario."""

    patients: tuple[int, ...]  # selected patient ids, ascending
    weights: tuple[int, ...]
    capacity: float
    values: tuple[float, ...]

    @property
    def total_value(self) -> float:
        return float(sum(self.values))


def build_cancellation_subproblem(
    inst: Instance, x_room: Sequence[float], scen: ScenarioSet, s: int, hd: tuple[int, int]
) -> SubproblemSpec:
    """Knapsack over the patients with ``x_room[p] == 1`` in suite ``hd`` under scenario ``s``."""
    h, d = hd
    sel = tuple(p for p in range(inst.n_patients) if x_room[p] > 0.5)
    cancel = inst.cancel
    return SubproblemSpec(
        patients=sel,
        weights=tuple(int(scen.durations[s, p]) for p in sel),
        capacity=float(inst.time_limit[h, d]),
        values=tuple(float(cancel[p]) for p in sel),
    )


# --------------------------------------------------------------------------
# schedules


@dataclass
class Schedule:
    """First-stage decisions at room level plus their cost components."""

    assignment: dict[int, tuple[int, int, int]]  # patient -> (h, d, r)
    postponed: list[int]
    open_rooms: list[tuple[int, int, int]]
    rooms_per_suite: dict[tuple[int, int], int] = field(default_factory=dict)
    operational_cost: float = 0.0
    expected_cancellation_cost: float = 0.0

    @property
    def objective(self) -> float:
        return self.operational_cost + self.expected_cancellation_cost

    @property
    def open_suites(self) -> list[tuple[int, int]]:
        return sorted({(h, d) for h, d, _ in self.open_rooms})

    def room_patients(self) -> dict[tuple[int, int, int], list[int]]:
        out: dict[tuple[int, int, int], list[int]] = {k: [] for k in self.open_rooms}
        for p, k in sorted(self.assignment.items()):
            out.setdefault(k, []).append(p)
        return out

    def suite_patients(self) -> dict[tuple[int, int], list[int]]:
        out: dict[tuple[int, int], list[int]] = {}
        for p, (h, d, _) in sorted(self.assignment.items()):
            out.setdefault((h, d), []).append(p)
        return out

    def validate(self, inst: Instance) -> None:
        P = inst.n_patients
        for p in range(P):
            placed = p in self.assignment
            post = p in self.postponed
            if placed == post:
                raise ValidationError(f"patient {p} must be either assigned or postponed")
            if post and inst.patients[p].mandatory:
                raise ValidationError(f"mandatory patient {p} is postponed")
        rooms = set(self.open_rooms)
        for p, k in self.assignment.items():
            if k not in rooms:
                raise ValidationError(f"patient {p} assigned to unopened room {k}")
            h, d, r = k
            if not (0 <= h < inst.hospitals and 0 <= d < inst.days and 0 <= r < inst.rooms_per_hospital):
                raise ValidationError(f"room {k} out of range")

    def to_dict(self) -> dict:
        return {
            "assignment": {str(p): list(k) for p, k in sorted(self.assignment.items())},
            "postponed": sorted(self.postponed),
            "open_rooms": [list(k) for k in sorted(self.open_rooms)],
            "open_suites": [list(k) for k in self.open_suites],
            "rooms_per_suite": {f"{h},{d}": n for (h, d), n in sorted(self.rooms_per_suite.items())},
            "operational_cost": self.operational_cost,
            "expected_cancellation_cost": self.expected_cancellation_cost,
            "objective": self.objective,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Schedule":
        try:
            assignment = {int(p): tuple(int(v) for v in k) for p, k in doc["assignment"].items()}
            rooms = [tuple(int(v) for v in k) for k in doc["open_rooms"]]
            rps = {}
            for key, n in doc.get("rooms_per_suite", {}).items():
                h, d = key.split(",")
                rps[(int(h), int(d))] = int(n)
            return cls(
                assignment=assignment,
                postponed=[int(p) for p in doc["postponed"]],
                open_rooms=rooms,
                rooms_per_suite=rps,
                operational_cost=float(doc.get("operational_cost", 0.0)),
                expected_cancellation_cost=float(doc.get("expected_cancellation_cost", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed schedule: {exc}") from exc


def operational_cost(inst: Instance, sched: Schedule) -> float:
    """Suite, room, scheduling and postponement costs of a schedule."""
    G, F = inst.suite_open_cost, inst.room_open_cost
    total = sum(G[h, d] for h, d in sched.open_suites)
    total += sum(F[h, d] for h, d, _ in sched.open_rooms)
    total += sum(inst.patients[p].sched_benefit[d] for p, (_, d, _) in sched.assignment.items())
    total += sum(inst.patients[p].unsched_penalty for p in sched.postponed)
    return float(total)


def schedule_from_room_solution(inst: Instance, m: MipModel, x: np.ndarray) -> Schedule:
    """Read a room-level schedule from a solution of a model with u, y, x, w columns."""
    H, D, R, P = inst.hospitals, inst.days, inst.rooms_per_hospital, inst.n_patients
    assignment = {}
    for h, d, p, r in product(range(H), range(D), range(P), range(R)):
        if x[m.col("x", h, d, p, r)] > 0.5:
            assignment[p] = (h, d, r)
    if m.has("y", 0, 0, 0):
        rooms = {(h, d, r) for h, d, r in inst.rooms() if x[m.col("y", h, d, r)] > 0.5}
        rooms |= set(assignment.values())
    else:
        rooms = set(assignment.values())
    postponed = [p for p in range(P) if p not in assignment]
    counts: dict[tuple[int, int], int] = {}
    for h, d, _ in rooms:
        counts[(h, d)] = counts.get((h, d), 0) + 1
    sched = Schedule(assignment, postponed, sorted(rooms), counts)
    sched.operational_cost = operational_cost(inst, sched)
    return sched
