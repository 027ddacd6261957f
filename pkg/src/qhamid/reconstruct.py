"""
Recover the local frame from Bell-coefficient moduli and pin down the Hamiltonian.

Each row ``a`` of the real SO(4) matrix ``kq`` satisfies four quadratic
relations ``mu_m = (w_m . a)^2`` whose left-hand sides are signed sums of the
squared moduli measured with the three reference probes. The ``w_m`` vectors
depend only on the magic basis and the probes and are derived numerically by
:func:`mu_row_pattern`. Sign ambiguities leave up to 16 candidates per row and
``16**4`` candidate matrices; orthogonality and ``det = +1`` prune them, the
survivors are grouped into distinct Hamiltonians, and concurrence measurements
pick the one consistent with the hidden system.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Protocol

import numpy as np
from scipy.linalg import expm
from scipy.optimize import least_squares

from . import qcore
from .errors import (
    AssignmentError,
    CharacterizationError,
    DegenerateClassError,
    InconsistencyError,
    InconsistentModuliError,
    InsufficientPeaksError,
    InvalidInputError,
    MissingMeasurementError,
    NoCandidatesError,
)
from .model import (
    CanonicalClass,
    LocalFrame,
    SpinOrbitParams,
    canonical_decompose,
    coupling_to_spin_orbit,
    hamiltonian_from_class,
    pauli_hamiltonian,
)
from .spectral import BellModuli, SpectralResult, analyze_traces

MU_CLAMP = 1e-3


@dataclass(frozen=True)
class Tolerances:
    orthogonality: float = 1e-6
    determinant: float = 1e-6
    cluster: float = 1e-6
    match: float = 5e-3
    disc_factor: float = 2.0
    mu_clamp: float = MU_CLAMP
    polish: bool = False

    @property
    def discrimination(self) -> float:
        return self.disc_factor * self.match

    @classmethod
    def noisy(cls) -> "Tolerances":
        return cls(orthogonality=0.02, determinant=0.05, cluster=1e-4, mu_clamp=1e-2, polish=True)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["discrimination"] = self.discrimination
        return out


@dataclass(frozen=True)
class Measurement:
    state_id: str
    t: float
    c2: float

    def __post_init__(self):
        if not -0.05 <= self.c2 <= 1.05:
            raise InvalidInputError(f"C^2 = {self.c2} is outside the physical range")


@dataclass
class Candidate:
    d: np.ndarray
    matrices: list = field(default_factory=list)

    @property
    def kq(self) -> np.ndarray:
        return self.matrices[0]


@dataclass
class CandidateSet:
    matrices: list
    candidates: list = field(default_factory=list)
    audit: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.candidates) if self.candidates else len(self.matrices)


class MeasurementOracle(Protocol):
    def measure(self, state_id: str, t: float, repeats: int = 1) -> float: ...


class ReplayOracle:
    """Answers measurement requests from a recorded table keyed by ``(state_id, t)``."""

    def __init__(self, measurements):
        self.table = {(m.state_id, float(m.t)): m.c2 for m in measurements}

    def measure(self, state_id: str, t: float, repeats: int = 1) -> float:
        try:
            return self.table[(state_id, float(t))]
        except KeyError:
            raise MissingMeasurementError(f"no recorded measurement for {state_id} at t={t!r}") from None


# --- mu equations ---------------------------------------------------------------


def _probe_forms(probe_ids=qcore.PROBE_IDS):
    forms = []
    for sid in probe_ids:
        q = qcore.magic_basis().conj().T @ qcore.resolve_state(sid)
        forms.append(np.real(np.outer(q, q.conj())))  # |a . q|^2 = a^T Re(q q^H) a
    m1, m2, m3 = forms
    return [m1 - m2 + m3, m1 + m2 - m3, -m1 + m2 + m3, np.eye(4) - m1 - m2 - m3]


def mu_row_pattern(probe_ids=qcore.PROBE_IDS) -> np.ndarray:
    """Rows ``w_m`` with ``mu_m = (w_m . a)^2`` for any row ``a`` of ``kq``.

    Each combination of probe forms must be rank one; the result is an
    orthogonal 4x4 matrix. Signs are fixed so the last non-zero entry is positive.
    """
    rows = []
    for form in _probe_forms(probe_ids):
        w, v = np.linalg.eigh(form)
        if abs(w[:-1]).max() > 1e-12:
            raise InconsistencyError("probe states do not give rank-one mu relations")
        vec = v[:, -1] * math.sqrt(max(w[-1], 0.0))
        last = vec[np.flatnonzero(np.abs(vec) > 1e-12)[-1]]
        rows.append(vec if last > 0 else -vec)
    pattern = np.array(rows)
    if not np.allclose(pattern @ pattern.T, np.eye(4), atol=1e-12):
        raise InconsistencyError("mu relations are not orthonormal")
    return pattern


MU_PATTERN = mu_row_pattern()


def mu_from_moduli(m1: BellModuli, m2: BellModuli, m3: BellModuli, row: int,
                   clamp: float = MU_CLAMP) -> np.ndarray:
    """``(mu_1 .. mu_4)`` for row ``row`` (1-based) of ``kq``."""
    if not 1 <= row <= 4:
        raise InvalidInputError("row must be 1..4")
    x1, x2, x3 = (float(m.squares[row - 1]) for m in (m1, m2, m3))
    mu = np.array([x1 - x2 + x3, x1 + x2 - x3, -x1 + x2 + x3, 1.0 - x1 - x2 - x3])
    if mu.min() < -clamp:
        raise InconsistentModuliError(f"row {row}: mu = {mu} has a negative entry")
    return np.maximum(mu, 0.0)


def row_candidates(mu, pattern: np.ndarray = MU_PATTERN, dedupe: float = 1e-9) -> list:
    """All rows ``a`` with ``(pattern @ a)**2 == mu``: the 16 sign choices, deduplicated."""
    root = np.sqrt(np.maximum(np.asarray(mu, dtype=float), 0.0))
    out = []
    for signs in itertools.product((1.0, -1.0), repeat=4):
        a = pattern.T @ (np.array(signs) * root)
        if all(np.linalg.norm(a - b) >= dedupe for b in out):
            out.append(a)
    return out


def assemble_candidates(rows, tol: float = 1e-6, det_tol: Optional[float] = None) -> CandidateSet:
    """Combine per-row candidates into SO(4) matrices, pruning on orthogonality as rows are added.

    Survivors are replaced by their polar factor, so emitted frames are
    orthogonal to machine precision even when the rows are estimates.
    """
    rows = [np.asarray(r, dtype=float) for r in rows]
    if len(rows) != 4 or any(len(r) == 0 for r in rows):
        raise InvalidInputError("need four non-empty candidate lists")
    det_tol = tol if det_tol is None else det_tol
    enumerated = int(np.prod([len(r) for r in rows]))
    checks = 0
    survivors = []

    def extend(prefix):
        nonlocal checks
        depth = len(prefix)
        if depth == 4:
            m = np.array(prefix)
            if abs(np.linalg.det(m) - 1.0) < det_tol:
                u, _, vt = np.linalg.svd(m)
                survivors.append(u @ vt)  # nearest orthogonal matrix; det stays +1
            return
        cand = rows[depth]
        ok = np.ones(len(cand), dtype=bool)
        for prev in prefix:
            checks += len(cand)
            ok &= np.abs(cand @ prev) <= tol
        for a in cand[ok]:
            extend(prefix + [a])

    extend([])
    audit = {"enumerated": enumerated, "orthogonality_checks": checks, "so4": len(survivors)}
    if not survivors:
        raise NoCandidatesError("no SO(4) matrix is consistent with the measured moduli")
    return CandidateSet(matrices=survivors, audit=audit)


def _so4_chart(kq):
    """Project ``kq`` onto SO(4) and return ``x -> expm(A(x)) @ kq0`` over 6 generators."""
    u, _, vt = np.linalg.svd(np.asarray(kq, dtype=float))
    if np.linalg.det(u @ vt) < 0:
        u[:, -1] *= -1
    kq0 = u @ vt
    iu = np.triu_indices(4, 1)

    def rotate(x):
        gen = np.zeros((4, 4))
        gen[iu] = x
        return expm(gen - gen.T) @ kq0

    return rotate


def _probe_vectors(probe_ids):
    return np.array([qcore.magic_basis().conj().T @ qcore.resolve_state(s) for s in probe_ids])


def polish_frame(kq, target_sq, probe_ids=qcore.PROBE_IDS) -> np.ndarray:
    """Least-squares refine an approximate SO(4) matrix against measured ``|l|^2`` rows.

    ``target_sq[k]`` holds the four squared moduli for probe ``probe_ids[k]``.
    """
    rotate = _so4_chart(kq)
    qs = _probe_vectors(probe_ids)
    target = np.asarray(target_sq, dtype=float)

    def resid(x):
        return (np.abs(qs @ rotate(x).T) ** 2 - target).ravel()

    sol = least_squares(resid, np.zeros(6), xtol=1e-14, ftol=1e-14, gtol=1e-14)
    return rotate(sol.x)


def fit_frame_to_traces(cls: CanonicalClass, kq, traces) -> np.ndarray:
    """Refine ``kq`` by fitting predicted C^2(t) directly to the sampled traces.

    Concurrence is invariant under the local frame, so with ``l = kq Q^dagger psi``
    the evolved state is ``Q diag(exp(-i lambda t)) l`` up to a local unitary.
    """
    rotate = _so4_chart(kq)
    lam = cls.eigenvalues
    q = qcore.magic_basis()
    qs = _probe_vectors([tr.input_state_id for tr in traces])
    phases = [np.exp(-1j * np.outer(tr.times, lam)) for tr in traces]
    observed = np.concatenate([tr.values for tr in traces])

    def resid(x):
        l = qs @ rotate(x).T
        pred = [qcore.squared_concurrence_many((ph * l[k]) @ q.T) for k, ph in enumerate(phases)]
        return np.concatenate(pred) - observed

    sol = least_squares(resid, np.zeros(6), x_scale=1e-2)
    return rotate(sol.x)


def distinct_hamiltonians(cset: CandidateSet, cls: CanonicalClass, tol: float = 1e-6) -> CandidateSet:
    """Group SO(4) candidates by the coupling matrix they generate."""
    groups: list[Candidate] = []
    for kq in cset.matrices:
        d = hamiltonian_from_class(cls, LocalFrame(kq=kq))
        for g in groups:
            if np.abs(g.d - d).max() < tol:
                g.matrices.append(kq)
                break
        else:
            groups.append(Candidate(d=d, matrices=[kq]))
    audit = dict(cset.audit)
    audit["distinct"] = len(groups)
    return CandidateSet(matrices=list(cset.matrices), candidates=groups, audit=audit)


# --- predictions and measurements ------------------------------------------------


class _Predictor:
    """Vectorised C^2 predictions for a fixed coupling matrix."""

    def __init__(self, d):
        self.w, self.v = qcore.eigh_jacobi(pauli_hamiltonian(d))

    def __call__(self, states, times) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=complex))
        times = np.broadcast_to(np.asarray(times, dtype=float), (states.shape[0],))
        coeff = states @ self.v.conj()  # row k: v^H psi_k
        psi_t = (np.exp(-1j * np.outer(times, self.w)) * coeff) @ self.v.T
        return qcore.squared_concurrence_many(psi_t)


def predict_c2(d, state_id: str, t: float) -> float:
    return float(_Predictor(d)(qcore.resolve_state(state_id), t)[0])


def filter_by_measurements(cset: CandidateSet, measurements, eps: float = 5e-3,
                           stage: str = "measurement_filter") -> CandidateSet:
    """Keep candidates reproducing every measurement to within ``eps``."""
    measurements = list(measurements)
    if not cset.candidates or not measurements:
        raise InvalidInputError("need candidates and at least one measurement")
    states = np.array([qcore.resolve_state(m.state_id) for m in measurements])
    times = np.array([m.t for m in measurements])
    observed = np.array([m.c2 for m in measurements])
    keep = [
        cand for cand in cset.candidates
        if np.abs(_Predictor(cand.d)(states, times) - observed).max() < eps
    ]
    if not keep:
        raise NoCandidatesError("every candidate contradicts the measurements")
    audit = dict(cset.audit)
    audit[stage] = len(keep)
    return CandidateSet(matrices=[m for c in keep for m in c.matrices], candidates=keep, audit=audit)


@dataclass(frozen=True)
class Probe:
    state_id: str
    t: float
    gap: float


def _probe_pool(budget: int, seed: int, t_max: float):
    rng = np.random.default_rng(seed)
    ids, states, times = [], [], []
    for sid in ("psi1", "psi2", "psi3", "psi4"):
        for t in (0.5, 1.0):
            ids.append(sid)
            states.append(qcore.resolve_state(sid))
            times.append(t)
    theta = np.arccos(rng.uniform(-1.0, 1.0, size=(budget, 2)))
    phi = rng.uniform(0.0, 2.0 * math.pi, size=(budget, 2))
    tt = rng.uniform(0.0, t_max, size=budget)
    for k in range(budget):
        sid = qcore.bloch_state_id(theta[k, 0], phi[k, 0], theta[k, 1], phi[k, 1])
        ids.append(sid)
        states.append(qcore.resolve_state(sid))
        times.append(t_max - tt[k])  # in (0, t_max]
    return ids, np.array(states), np.array(times)


def find_discriminating_probe(cset: CandidateSet, budget: int = 4096, seed: int = 0,
                              t_max: float = 10.0, eps_disc: float = 1e-2) -> Optional[Probe]:
    """Product state and time that best separate the surviving candidates.

    Returns ``None`` when no probe in the pool separates them by more than
    ``eps_disc``. With more than two survivors and no probe separating all
    pairs, the probe separating the most pairs is returned instead.
    """
    cands = cset.candidates
    if len(cands) < 2:
        raise InvalidInputError("need at least two candidates to discriminate")
    ids, states, times = _probe_pool(budget, seed, t_max)
    preds = np.array([_Predictor(c.d)(states, times) for c in cands])
    pairs = list(itertools.combinations(range(len(cands)), 2))
    gaps = np.array([np.abs(preds[i] - preds[j]) for i, j in pairs])
    worst = gaps.min(axis=0)
    k = int(np.argmax(worst))
    if worst[k] > eps_disc:
        return Probe(ids[k], float(times[k]), float(worst[k]))
    separated = (gaps > eps_disc).sum(axis=0)
    if separated.max() == 0:
        return None
    best = np.flatnonzero(separated == separated.max())
    k = int(best[np.argmax(gaps[:, best].max(axis=0))])
    return Probe(ids[k], float(times[k]), float(gaps[:, k].max()))


# --- moduli straight from a known Hamiltonian ------------------------------------


def bell_coefficients(frame: LocalFrame, state) -> np.ndarray:
    """``l = kq Q^dagger |state>``."""
    return np.asarray(frame.kq) @ (qcore.magic_basis().conj().T @ qcore.normalize(state))


def analytic_moduli(d, probe_ids=qcore.PROBE_IDS):
    """Exact class and Bell moduli of ``d`` for the given probes (bypasses spectra)."""
    cls, frame = canonical_decompose(d)
    mods = {
        sid: BellModuli(np.abs(bell_coefficients(frame, qcore.resolve_state(sid))), sid)
        for sid in probe_ids
    }
    return cls, mods


# --- full pipeline ---------------------------------------------------------------


@dataclass
class CharacterizationResult:
    status: str
    cls: Optional[CanonicalClass] = None
    d: Optional[np.ndarray] = None
    params: Optional[SpinOrbitParams] = None
    audit: dict = field(default_factory=dict)
    measurements: list = field(default_factory=list)
    tolerances: Optional[Tolerances] = None
    candidates: Optional[CandidateSet] = None
    spectral: Optional[SpectralResult] = None
    mu: Optional[np.ndarray] = None
    snapshots: dict = field(default_factory=dict)
    stage: str = ""
    message: str = ""


def _repeats_for(shots: int, tol: Tolerances) -> int:
    if shots <= 0:
        return 1
    sd = 0.5 / math.sqrt(shots)  # worst case of the per-point noise model
    return max(1, math.ceil((sd / (tol.discrimination / 4.0)) ** 2))


def frame_candidates(cls: CanonicalClass, moduli: dict, tol: Tolerances,
                     probe_ids=qcore.PROBE_IDS):
    """mu table, SO(4) survivors and distinct Hamiltonians for measured moduli."""
    m1, m2, m3 = (moduli[s] for s in probe_ids)
    mu = np.array([mu_from_moduli(m1, m2, m3, r, tol.mu_clamp) for r in range(1, 5)])
    rows = [row_candidates(mu_r) for mu_r in mu]
    cset = assemble_candidates(rows, tol.orthogonality, tol.determinant)
    if tol.polish:
        target = np.array([moduli[s].squares for s in probe_ids])
        polished = []
        for kq in cset.matrices:
            p = polish_frame(kq, target, probe_ids)
            if all(np.abs(p - q).max() > tol.cluster for q in polished):
                polished.append(p)
        cset = CandidateSet(matrices=polished, audit=dict(cset.audit, polished=len(polished)))
    return mu, distinct_hamiltonians(cset, cls, tol.cluster)


def refine_candidates(cset: CandidateSet, cls: CanonicalClass, traces, tol: Tolerances) -> CandidateSet:
    """Fit each distinct candidate's frame to the raw traces, then re-cluster."""
    refined = CandidateSet(
        matrices=[fit_frame_to_traces(cls, cand.kq, traces) for cand in cset.candidates],
        audit=dict(cset.audit),
    )
    out = distinct_hamiltonians(refined, cls, tol.cluster)
    out.audit["distinct"] = min(out.audit["distinct"], cset.audit["distinct"])
    return out


def reconstruct_from_moduli(cls: CanonicalClass, moduli: dict, oracle: MeasurementOracle,
                            J: float = 1.0, tol: Tolerances = Tolerances(), mode: str = "general",
                            shots: int = 0, budget: int = 4096, seed: int = 0,
                            t_max: float = 10.0, max_rounds: int = 8,
                            traces=None) -> CharacterizationResult:
    """Everything after the spectral stage: candidates, filtering, discrimination.

    With ``tol.polish`` set and ``traces`` given, each distinct candidate's
    frame is refit against the raw traces before measurement filtering.
    """
    if mode not in ("general", "paper"):
        raise InvalidInputError(f"unknown mode {mode!r}")
    result = CharacterizationResult(status="failed", cls=cls, tolerances=tol)
    repeats = _repeats_for(shots, tol)

    def measure(state_id, t):
        m = Measurement(state_id, float(t), oracle.measure(state_id, t, repeats))
        result.measurements.append(m)
        return m

    stage = "candidates"
    try:
        result.mu, cset = frame_candidates(cls, moduli, tol)
        if tol.polish and traces:
            cset = refine_candidates(cset, cls, traces, tol)
        result.snapshots["distinct"] = cset
        stage = "measurement_filter"
        first = [measure(sid, 1.0) for sid in qcore.PROBE_IDS]
        cset = filter_by_measurements(cset, first, tol.match, stage="probe_filter")
        result.snapshots["probe_filter"] = cset
        stage = "discrimination"
        rounds = 0
        while len(cset.candidates) > 1 and rounds < max_rounds:
            if mode == "paper" and rounds == 0:
                probe = Probe("psi4", 0.5, float("nan"))
            else:
                probe = find_discriminating_probe(cset, budget, seed + rounds, t_max, tol.discrimination)
            if probe is None:
                break
            stage_name = f"discrimination_{rounds + 1}"
            cset = filter_by_measurements(cset, [measure(probe.state_id, probe.t)], tol.match,
                                          stage=stage_name)
            result.snapshots[stage_name] = cset
            rounds += 1
    except CharacterizationError as exc:
        result.stage, result.message = stage, str(exc)
        return result
    cset.audit["final"] = len(cset.candidates)
    result.audit = cset.audit
    result.candidates = cset
    if len(cset.candidates) == 1:
        result.status = "unique"
        result.d = cset.candidates[0].d
        result.params = coupling_to_spin_orbit(result.d, J)
    else:
        result.status = "ambiguous"
        result.stage = "discrimination"
        result.message = f"{len(cset.candidates)} candidates remain indistinguishable"
    return result


def characterize(traces, oracle: MeasurementOracle, J: float = 1.0,
                 tol: Optional[Tolerances] = None, mode: str = "general", budget: int = 4096,
                 seed: int = 0, t_max: float = 10.0) -> CharacterizationResult:
    """Full reconstruction from the three probe traces plus follow-up measurements."""
    traces = list(traces)
    shots = max((tr.shots for tr in traces), default=0)
    if tol is None:
        tol = Tolerances.noisy() if shots > 0 else Tolerances()
    by_id = {tr.input_state_id: tr for tr in traces}
    missing = [s for s in qcore.PROBE_IDS if s not in by_id]
    if missing:
        return CharacterizationResult("failed", tolerances=tol, stage="spectral",
                                      message=f"missing probe traces: {missing}")
    try:
        spec = analyze_traces([by_id[s] for s in qcore.PROBE_IDS])
    except (InsufficientPeaksError, AssignmentError, DegenerateClassError) as exc:
        return CharacterizationResult("failed", tolerances=tol, stage="canonical", message=str(exc))
    except CharacterizationError as exc:
        return CharacterizationResult("failed", tolerances=tol, stage="spectral", message=str(exc))
    result = reconstruct_from_moduli(spec.cls, spec.moduli, oracle, J, tol, mode, shots,
                                     budget, seed, t_max, traces=[by_id[s] for s in qcore.PROBE_IDS])
    result.spectral = spec
    return result
