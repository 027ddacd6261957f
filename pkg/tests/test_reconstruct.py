import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_coupling, random_su2
from qhamid import qcore
from qhamid import reconstruct as R
from qhamid.errors import InconsistentModuliError, InvalidInputError, NoCandidatesError
from qhamid.expsim import NoiseConfig, SimulatedOracle, simulate_trace
from qhamid.model import CanonicalClass, LocalFrame, canonical_decompose, hamiltonian_from_class
from qhamid.spectral import BellModuli

seeds = st.integers(0, 2**32 - 1)
S = 1 / np.sqrt(2)


def moduli_for(kq):
    frame = LocalFrame(kq=np.asarray(kq, float))
    return [BellModuli(np.abs(R.bell_coefficients(frame, qcore.resolve_state(s))), s) for s in qcore.PROBE_IDS]


def random_so4(rng):
    return np.real(qcore.to_magic(np.kron(random_su2(rng), random_su2(rng))))


def test_mu_pattern_matches_printed_row_equations():
    # printed: mu1 = (a3-a1)^2/2, mu2 = (a3+a1)^2/2, mu3 = (a2-a4)^2/2, mu4 = (a2+a4)^2/2
    printed = np.array([[-S, 0, S, 0], [S, 0, S, 0], [0, S, 0, -S], [0, S, 0, S]])
    w = R.MU_PATTERN
    for row in printed:
        assert any(np.allclose(row, s * cand, atol=1e-12) for cand in w for s in (1, -1))
    np.testing.assert_allclose(w @ w.T, np.eye(4), atol=1e-12)


def test_mu_for_identity_frame():
    mods = moduli_for(np.eye(4))
    np.testing.assert_allclose(R.mu_from_moduli(*mods, row=1), [0.5, 0.5, 0, 0], atol=1e-12)


def test_mu_rows_sum_to_one_and_validate():
    mods = moduli_for(random_so4(np.random.default_rng(2)))
    for r in range(1, 5):
        assert R.mu_from_moduli(*mods, row=r).sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(InvalidInputError):
        R.mu_from_moduli(*mods, row=5)
    bad = [BellModuli(np.array([0.9, 0.1, 0.1, 0.1]), "x"), BellModuli(np.array([0.1, 0.9, 0.1, 0.1]), "y"),
           BellModuli(np.array([0.1, 0.1, 0.1, 0.1]), "z")]
    with pytest.raises(InconsistentModuliError):
        R.mu_from_moduli(*bad, row=2)


def test_trial_mu_rows(trial_d):
    _, mods = R.analytic_moduli(trial_d)
    m = [mods[s] for s in qcore.PROBE_IDS]
    np.testing.assert_allclose(R.mu_from_moduli(*m, row=1), [0.2121, 0.2046, 0.5601, 0.0233], atol=2e-3)
    np.testing.assert_allclose(R.mu_from_moduli(*m, row=2), [0.000041, 0.00021, 0.0449, 0.9548], atol=2e-3)


def test_row_candidates_examples():
    cands = R.row_candidates([0.5, 0.5, 0, 0])
    for want in ([1, 0, 0, 0], [-1, 0, 0, 0], [0, 0, 1, 0], [0, 0, -1, 0]):
        assert any(np.allclose(c, want, atol=1e-12) for c in cands)
    assert len(cands) == 4  # zero mu3/mu4 collapse sign choices
    cands = R.row_candidates([0.3, 0.3, 0.2, 0.2])
    assert any(abs(c[0]) < 1e-12 for c in cands)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_row_candidates_contain_the_row(seed):
    a = qcore.normalize(np.random.default_rng(seed).normal(size=4)).real
    mu = (R.MU_PATTERN @ a) ** 2
    assert any(np.abs(c - a).max() < 1e-10 for c in R.row_candidates(mu))


def test_assemble_identity_and_error():
    mods = moduli_for(np.eye(4))
    rows = [R.row_candidates(R.mu_from_moduli(*mods, row=r)) for r in range(1, 5)]
    cset = R.assemble_candidates(rows)
    assert any(np.allclose(m, np.eye(4)) for m in cset.matrices)
    assert cset.audit["enumerated"] == np.prod([len(r) for r in rows])
    with pytest.raises(NoCandidatesError):
        R.assemble_candidates([[np.array([1.0, 0, 0, 0])]] * 4)
    with pytest.raises(InvalidInputError):
        R.assemble_candidates([[np.ones(4)]] * 3)


def test_identity_frame_is_a_single_cluster():
    cls = CanonicalClass((1.0, 0.6, 0.3))
    cset = R.CandidateSet(matrices=[np.eye(4), np.eye(4).copy()])
    assert len(R.distinct_hamiltonians(cset, cls).candidates) == 1


def test_random_frames_are_contained():
    rng = np.random.default_rng(11)
    for _ in range(100):
        kq = random_so4(rng)
        mods = moduli_for(kq)
        rows = [R.row_candidates(R.mu_from_moduli(*mods, row=r)) for r in range(1, 5)]
        cset = R.assemble_candidates(rows)
        assert any(np.abs(m - kq).max() < 1e-6 for m in cset.matrices)
        for m in cset.matrices:
            np.testing.assert_allclose(m.T @ m, np.eye(4), atol=1e-8)
            assert np.linalg.det(m) == pytest.approx(1.0, abs=1e-8)


def test_trial_candidates(trial_d):
    cls, mods = R.analytic_moduli(trial_d)
    _, cset = R.frame_candidates(cls, mods, R.Tolerances())
    assert cset.audit["enumerated"] == 65536 and cset.audit["so4"] == 64
    assert any(np.abs(c.d - trial_d).max() < 1e-10 for c in cset.candidates)
    assert cset.audit["orthogonality_checks"] < 65536


def trial_set(trial_d):
    cls, mods = R.analytic_moduli(trial_d)
    return R.frame_candidates(cls, mods, R.Tolerances())[1]


def test_filter_keeps_everything_for_uninformative_measurement(trial_d):
    cset = trial_set(trial_d)
    zero = [R.Measurement("psi1", 0.0, 0.0)]  # every candidate predicts 0 at t = 0
    assert len(R.filter_by_measurements(cset, zero).candidates) == len(cset.candidates)
    with pytest.raises(NoCandidatesError):
        R.filter_by_measurements(cset, [R.Measurement("psi1", 1.0, 0.9)])
    with pytest.raises(InvalidInputError):
        R.filter_by_measurements(cset, [])
    with pytest.raises(InvalidInputError):
        R.Measurement("psi1", 1.0, 1.5)


def test_filter_keeps_truth_and_matches_measurements(trial_d):
    cset = trial_set(trial_d)
    oracle = SimulatedOracle(trial_d)
    ms = [R.Measurement(s, 1.0, oracle.measure(s, 1.0)) for s in qcore.PROBE_IDS]
    kept = R.filter_by_measurements(cset, ms)
    assert any(np.abs(c.d - trial_d).max() < 1e-10 for c in kept.candidates)
    for c in kept.candidates:
        for m in ms:
            assert abs(R.predict_c2(c.d, m.state_id, m.t) - m.c2) < 5e-3
    assert kept.audit["measurement_filter"] <= kept.audit["distinct"]


def test_discriminating_probe(trial_d):
    cset = trial_set(trial_d)
    pair = R.CandidateSet([], candidates=cset.candidates[:2])
    probe = R.find_discriminating_probe(pair, budget=512, seed=1)
    assert probe is not None and probe.gap > 1e-2
    a, b = (R.predict_c2(c.d, probe.state_id, probe.t) for c in pair.candidates)
    assert abs(a - b) == pytest.approx(probe.gap)
    # many candidates: falls back to the probe separating the most pairs
    probe = R.find_discriminating_probe(cset, budget=512, seed=1)
    preds = [R.predict_c2(c.d, probe.state_id, probe.t) for c in cset.candidates]
    gaps = [abs(a - b) for i, a in enumerate(preds) for b in preds[i + 1:]]
    assert max(gaps) == pytest.approx(probe.gap)
    assert sum(g > 1e-2 for g in gaps) > len(gaps) // 2
    with pytest.raises(InvalidInputError):
        R.find_discriminating_probe(R.CandidateSet([], candidates=cset.candidates[:1]))
    twins = R.CandidateSet([], candidates=[cset.candidates[0], cset.candidates[0]])
    assert R.find_discriminating_probe(twins, budget=64) is None


@pytest.mark.parametrize("mode", ["paper", "general"])
def test_trial_characterization(trial_d, trial_traces, mode):
    res = R.characterize(trial_traces, SimulatedOracle(trial_d), mode=mode)
    assert res.status == "unique"
    np.testing.assert_allclose(res.d, trial_d, atol=1e-6)
    counts = [v for k, v in res.audit.items() if k != "orthogonality_checks"]
    assert counts == sorted(counts, reverse=True)
    assert res.audit["final"] == 1


def test_degenerate_hamiltonian_fails_at_canonical_stage():
    d = np.eye(3)
    traces = [simulate_trace(d, s, n=1024) for s in qcore.PROBE_IDS]
    res = R.characterize(traces, SimulatedOracle(d))
    assert res.status == "failed" and res.stage == "canonical"


def test_missing_trace_fails(trial_traces, trial_d):
    res = R.characterize(trial_traces[:2], SimulatedOracle(trial_d))
    assert res.status == "failed" and "psi3" in res.message


def test_ambiguity_is_reported(trial_d):
    cls, mods = R.analytic_moduli(trial_d)
    # a huge discrimination margin makes every probe "insufficient"
    tol = R.Tolerances(disc_factor=1e3)
    res = R.reconstruct_from_moduli(cls, mods, SimulatedOracle(trial_d), tol=tol, budget=64)
    assert res.status == "ambiguous" and len(res.candidates.candidates) == 2
    assert res.params is None


def test_replay_oracle_reproduces_run(trial_d):
    cls, mods = R.analytic_moduli(trial_d)
    first = R.reconstruct_from_moduli(cls, mods, SimulatedOracle(trial_d), budget=256)
    again = R.reconstruct_from_moduli(cls, mods, R.ReplayOracle(first.measurements), budget=256)
    np.testing.assert_array_equal(first.d, again.d)
    assert first.measurements == again.measurements
    empty = R.reconstruct_from_moduli(cls, mods, R.ReplayOracle([]), budget=256)
    assert empty.status == "failed" and empty.stage == "measurement_filter"


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_analytic_round_trip(seed):
    d = random_coupling(np.random.default_rng(seed))
    cls, mods = R.analytic_moduli(d)
    res = R.reconstruct_from_moduli(cls, mods, SimulatedOracle(d), budget=1024, seed=seed % 1000)
    assert res.status == "unique"
    assert np.abs(res.d - d).max() < 1e-6


def test_noisy_trial_run(trial_d):
    noise = NoiseConfig(100_000, seed=3)
    traces = [simulate_trace(trial_d, s, noise=noise) for s in qcore.PROBE_IDS]
    res = R.characterize(traces, SimulatedOracle(trial_d, noise), seed=3)
    assert res.status == "unique"
    assert res.tolerances.polish
    np.testing.assert_allclose(res.d, trial_d, atol=5e-3)


def test_frame_fit_to_traces_recovers_truth(trial_d, trial_traces):
    cls, frame = canonical_decompose(trial_d)
    rng = np.random.default_rng(0)
    gen = rng.normal(size=(4, 4)) * 1e-3
    from scipy.linalg import expm
    start = expm(gen - gen.T) @ frame.kq
    fitted = R.fit_frame_to_traces(cls, start, [tr for tr in trial_traces])
    np.testing.assert_allclose(hamiltonian_from_class(cls, LocalFrame(kq=fitted)), trial_d, atol=1e-6)
