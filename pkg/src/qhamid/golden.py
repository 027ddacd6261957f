"""
Published reference numbers for the trial spin-orbit Hamiltonian.

Peak heights and mu values are printed at a x1e-2 scale; heights are further
quoted as ``2*pi*p`` relative to the ``p_ij = |l_i|^4 |l_j|^4`` normalization
used by :mod:`qhamid.spectral` (verified entry by entry on the trial case).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qcore
from .expsim import DEFAULT_DT, DEFAULT_SAMPLES, SimulatedOracle, simulate_trace
from .model import PAIR_LABELS, SpinOrbitParams, spin_orbit_to_coupling
from .reconstruct import CharacterizationResult, characterize, predict_c2

TRIAL = SpinOrbitParams(
    J=1.0,
    beta=(0.01, 0.005, 0.02),
    gamma=(0.003, 0.005, 0.001, 0.0015, 0.0024, 0.0009),
)

CLASS = (1.006, 1.003, 0.999)
CLASS_TOL = 0.002

#: Frequencies with unambiguous labels, and the sub-bin pair compared unordered.
FREQUENCIES = {"23": 8.039, "13": 8.025, "34": 8.011, "24": 0.028}
SMALL_PAIR = (0.012, 0.016)  # printed as w12, w14; labels swapped at rounding level
FREQ_TOL = 0.004

#: Peak heights (x1e-2, ``2*pi*p`` scale), order 12, 13, 14, 23, 24, 34.
HEIGHT_SCALE = 1e-2 / (2.0 * math.pi)
HEIGHTS = {
    "psi1": (0.0, 6.81, 2.32, 0.0, 0.0, 13.35),
    "psi2": (0.0467, 5.68, 11.01, 0.0197, 0.0383, 4.66),
    "psi3": (0.0473, 5.91, 10.84, 0.0201, 0.0367, 4.59),
}
HEIGHT_TOL = 0.003  # absolute, on the 2*pi*p scale (0.3 printed units)

#: mu quadruples per row of kq (x1e-2).
MU_SCALE = 1e-2
MU = (
    (21.21, 20.46, 56.01, 2.33),
    (0.0041, 0.021, 4.49, 95.48),
    (50.24, 49.74, 0.0110, 0.0012),
    (28.55, 29.78, 39.49, 2.19),
)
MU_TOL = 0.002
MU_SUM_TOL = 2e-3

SO4_COUNT = 64
DISTINCT_COUNT = 16

#: Table II: C^2 at t = 1 for the printed H_1..H_4 and the measured U(1).
TABLE2 = {
    "psi1": (0.581, 0.581, 0.581, 0.581, 0.581),
    "psi2": (0.147, 0.147, 0.142, 0.147, 0.147),
    "psi3": (0.144, 0.150, 0.150, 0.150, 0.150),
}
TABLE2_TOL = 0.001

#: Final discrimination with psi4 at t = 0.5: C^2(H_2), C^2(H_4).
FINAL_PROBE = ("psi4", 0.5)
FINAL_PAIR = (0.200, 0.196)
FINAL_TOL = 0.001
PARAM_TOL = 2e-3


# --- reproduction ------------------------------------------------------------------


@dataclass
class GoldenLine:
    name: str
    observed: object
    expected: object
    tolerance: float
    passed: bool

    def format(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: observed {self.observed} vs published {self.expected} (tol {self.tolerance:g})"


@dataclass
class PaperScenario:
    d: np.ndarray
    result: CharacterizationResult
    table2: dict = field(default_factory=dict)   # state -> predictions over distinct candidates
    final_pair: tuple = ()                       # (C^2 of truth, C^2 of the other survivor)


def run_paper_scenario(dt: float = DEFAULT_DT, n: int = DEFAULT_SAMPLES, workers: int = 1) -> PaperScenario:
    """Noiseless trial run with the published schedule (three probes at t=1, then psi4 at t=0.5)."""
    d = spin_orbit_to_coupling(TRIAL)
    traces = [simulate_trace(d, sid, dt, n, workers=workers) for sid in qcore.PROBE_IDS]
    result = characterize(traces, SimulatedOracle(d), J=TRIAL.J, mode="paper")
    scenario = PaperScenario(d=d, result=result)
    distinct = result.snapshots.get("distinct")
    if distinct is not None:
        scenario.table2 = {
            sid: [predict_c2(c.d, sid, 1.0) for c in distinct.candidates] for sid in qcore.PROBE_IDS
        }
    pair = result.snapshots.get("probe_filter")
    if pair is not None and len(pair.candidates) == 2:
        sid, t = FINAL_PROBE
        truth_first = sorted(pair.candidates, key=lambda c: np.abs(c.d - d).max())
        scenario.final_pair = tuple(predict_c2(c.d, sid, t) for c in truth_first)
    return scenario


def _contains(values, target, tol) -> bool:
    return any(abs(v - target) <= tol for v in values)


def golden_lines(sc: PaperScenario) -> list:
    """Side-by-side comparison of a scenario with every published number."""
    r = sc.result
    lines = []

    def add(name, observed, expected, tol, passed):
        lines.append(GoldenLine(name, observed, expected, tol, bool(passed)))

    spec = r.spectral
    if spec is None:
        add("pipeline", r.status, "unique", 0, False)
        return lines
    c = spec.cls.c
    for k in range(3):
        add(f"c{k + 1}", round(c[k], 4), CLASS[k], CLASS_TOL, abs(c[k] - CLASS[k]) <= CLASS_TOL)

    freqs = spec.peaksets["psi2"].frequencies
    for label, want in FREQUENCIES.items():
        add(f"omega{label}", round(freqs[label], 4), want, FREQ_TOL, abs(freqs[label] - want) <= FREQ_TOL)
    small = sorted((freqs["12"], freqs["14"]))
    ok = all(abs(a - b) <= FREQ_TOL for a, b in zip(small, sorted(SMALL_PAIR)))
    add("omega12/omega14 (unordered)", tuple(round(x, 4) for x in small), SMALL_PAIR, FREQ_TOL, ok)

    for sid, row in HEIGHTS.items():
        ps = spec.peaksets[sid]
        for label, want in zip(PAIR_LABELS, row):
            got = ps.heights[label] / HEIGHT_SCALE
            add(f"p{label}[{sid}] x1e-2", round(got, 4), want, HEIGHT_TOL / 1e-2,
                abs(got - want) * 1e-2 <= HEIGHT_TOL)

    if r.mu is not None:
        for i, row in enumerate(MU):
            for j, want in enumerate(row):
                got = r.mu[i, j] / MU_SCALE
                add(f"mu{j + 1}({i + 1}) x1e-2", round(got, 4), want, MU_TOL / MU_SCALE,
                    abs(r.mu[i, j] - want * MU_SCALE) <= MU_TOL)
            total = float(r.mu[i].sum())
            add(f"sum mu({i + 1})", round(total, 6), 1.0, MU_SUM_TOL, abs(total - 1.0) <= MU_SUM_TOL)

    audit = r.audit or {}
    if "so4" not in audit and r.snapshots.get("distinct") is not None:
        audit = r.snapshots["distinct"].audit
    add("SO(4) matrices", audit.get("so4"), SO4_COUNT, 0, audit.get("so4") == SO4_COUNT)
    add("distinct Hamiltonians", audit.get("distinct"), DISTINCT_COUNT, 0,
        audit.get("distinct") == DISTINCT_COUNT)

    measured = {m.state_id: m.c2 for m in r.measurements if m.t == 1.0}
    for sid, row in TABLE2.items():
        preds = sc.table2.get(sid, [])
        for want in sorted(set(row[:4])):
            add(f"Table II {sid} candidate value", _nearest(preds, want), want, TABLE2_TOL,
                _contains(preds, want, TABLE2_TOL))
        got = measured.get(sid, float("nan"))
        add(f"Table II {sid} measured U(1)", round(got, 4), row[4], TABLE2_TOL, abs(got - row[4]) <= TABLE2_TOL)
    after = audit.get("probe_filter")
    add("survivors after Table II filtering", after, 2, 0, after == 2)

    for name, got, want in zip(("C2(H_2) psi4 t=0.5", "C2(H_4) psi4 t=0.5"), sc.final_pair, FINAL_PAIR):
        add(name, round(got, 4), want, FINAL_TOL, abs(got - want) <= FINAL_TOL)
    if len(sc.final_pair) != 2:
        add("surviving pair for psi4 probe", len(sc.final_pair), 2, 0, False)

    add("status", r.status, "unique", 0, r.status == "unique")
    if r.params is not None:
        for k, (got, want) in enumerate(zip(r.params.beta, TRIAL.beta)):
            add(f"beta[{k}]", round(got, 6), want, PARAM_TOL, abs(got - want) <= PARAM_TOL)
        for k, (got, want) in enumerate(zip(r.params.gamma, TRIAL.gamma)):
            add(f"gamma[{k}]", round(got, 6), want, PARAM_TOL, abs(got - want) <= PARAM_TOL)
    return lines


def _nearest(values, target):
    if not values:
        return None
    return round(min(values, key=lambda v: abs(v - target)), 4)
