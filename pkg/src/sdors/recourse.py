"""Per-room cancellation recourse: exact values, LP relaxations and the cuts built from them."""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .bdd import Diagram, KnapsackLp, bdd_benders_cut, build_diagram, extract_duals, knapsack_lp_duals, shortest_path
from .model import Cut, Instance, ScenarioSet, SubproblemSpec, make_cut

LBBD = "LBBD"
BDD = "BDD-Benders"
BENDERS_LP = "Benders-LP"
RELAXATION = "Relaxation-Bound"


class RecourseOracle:
    """Caches one diagram per (capacity, scenario) over all patients.

    A room's selected patients enter as a mask, so every room of a suite and
    every master proposal share the same diagram.
    """

    def __init__(self, inst: Instance, scen: ScenarioSet):
        self.inst = inst
        self.scen = scen
        self.cancel = inst.cancel
        self._diagrams: dict[tuple[float, int], Diagram] = {}
        self._exact: dict[tuple, tuple[float, tuple[int, ...]]] = {}

    def diagram(self, hd: tuple[int, int], s: int) -> Diagram:
        cap = float(np.floor(self.inst.time_limit[hd]))
        key = (cap, s)
        dia = self._diagrams.get(key)
        if dia is None:
            P = self.inst.n_patients
            spec = SubproblemSpec(
                patients=tuple(range(P)),
                weights=tuple(int(v) for v in self.scen.durations[s]),
                capacity=cap,
                values=tuple(float(v) for v in self.cancel),
            )
            dia = build_diagram(spec, "weight")
            self._diagrams[key] = dia
        return dia

    def _mask(self, patients: Sequence[int]) -> np.ndarray:
        m = np.zeros(self.inst.n_patients, dtype=bool)
        m[list(patients)] = True
        return m

    def exact(self, hd: tuple[int, int], s: int, patients: Sequence[int]) -> tuple[float, tuple[int, ...]]:
        """Q-bar and the kept patients for one room under scenario ``s``."""
        patients = tuple(sorted(patients))
        if not patients:
            return 0.0, ()
        key = (float(self.inst.time_limit[hd]), s, patients)
        hit = self._exact.get(key)
        if hit is None:
            value, keep = shortest_path(self.diagram(hd, s), self._mask(patients))
            hit = (float(self.cancel[list(patients)].sum()) + value, keep)
            self._exact[key] = hit
        return hit

    def expected(self, hd: tuple[int, int], patients: Sequence[int]) -> float:
        return float(np.mean([self.exact(hd, s, patients)[0] for s in range(self.scen.count)]))

    def lp(self, hd: tuple[int, int], s: int, upper: Sequence[float]) -> KnapsackLp:
        """LP relaxation over all patients with ``z_p <= upper_p``."""
        return knapsack_lp_duals(
            self.cancel, self.scen.durations[s], float(np.floor(self.inst.time_limit[hd])), upper
        )

    # ------------------------------------------------------------------ cuts
    def lbbd_cut(self, q_col: int, x_cols: Mapping[int, int], patients: Sequence[int], qbar: float,
                 indices: tuple) -> Cut:
        """``Q >= Qbar - sum_{p in P-hat} c_p (1 - x_p)``."""
        coefs = {q_col: 1.0}
        const = qbar
        for p in patients:
            coefs[x_cols[p]] = -float(self.cancel[p])
            const -= float(self.cancel[p])
        return make_cut(coefs, ">=", const, LBBD, indices, key=(LBBD, indices, tuple(sorted(patients))))

    def bdd_cut(self, q_col: int, x_cols: Mapping[int, int], hd: tuple[int, int], s: int,
                patients: Sequence[int], indices: tuple) -> Cut:
        dia = self.diagram(hd, s)
        duals = extract_duals(dia, self._mask(patients))
        cut = bdd_benders_cut(dia, duals, q_col, x_cols, indices, family=BDD)
        cut.key = (BDD, indices, tuple(sorted(patients)))
        return cut

    def lp_cut(self, q_col: int, x_cols: Mapping[int, int], hd: tuple[int, int], sol: KnapsackLp,
               indices: tuple) -> Cut:
        """Classical Benders cut ``Q >= sum_p (c_p + delta_p) x_p + B eta``."""
        coefs = {q_col: 1.0}
        for p, col in x_cols.items():
            coefs[col] = -(float(self.cancel[p]) + sol.delta[p])
        rhs = float(np.floor(self.inst.time_limit[hd])) * sol.eta
        return make_cut(coefs, ">=", rhs, BENDERS_LP, indices)


def relaxation_bound_coefs(inst: Instance, scen: ScenarioSet, s: int) -> float:
    """Smallest cancellation cost per minute under scenario ``s``."""
    return float(np.min(inst.cancel / scen.durations[s]))
