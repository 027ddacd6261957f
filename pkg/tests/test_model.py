import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from conftest import random_coupling
from qhamid import golden, qcore
from qhamid.errors import DegenerateClassError, InconsistencyError, InvalidInputError
from qhamid.model import (
    FREQUENCY_MATRIX,
    PAIR_LABELS,
    CanonicalClass,
    LocalFrame,
    SpinOrbitParams,
    canonical_decompose,
    coupling_to_spin_orbit,
    hamiltonian_from_class,
    pauli_coefficients,
    pauli_hamiltonian,
    predicted_frequencies,
    spin_orbit_to_coupling,
)

seeds = st.integers(0, 2**32 - 1)


def test_trial_coupling_matrix():
    d = spin_orbit_to_coupling(golden.TRIAL)
    expect = np.array([
        [1.003, 0.0015 + 0.02, 0.0024 - 0.005],
        [0.0015 - 0.02, 1.005, 0.0009 + 0.01],
        [0.0024 + 0.005, 0.0009 - 0.01, 1.001],
    ])
    np.testing.assert_allclose(d, expect, atol=1e-15)


def test_spin_orbit_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = SpinOrbitParams(J=rng.uniform(0.5, 2), beta=rng.normal(size=3) * 0.1, gamma=rng.normal(size=6) * 0.1)
        back = coupling_to_spin_orbit(spin_orbit_to_coupling(p), p.J)
        np.testing.assert_allclose(back.beta, p.beta, atol=1e-14)
        np.testing.assert_allclose(back.gamma, p.gamma, atol=1e-14)
    with pytest.raises(InvalidInputError):
        coupling_to_spin_orbit(np.eye(3), 0.0)
    with pytest.raises(InvalidInputError):
        SpinOrbitParams(1.0, (0, 0), (0,) * 6)


def test_pauli_coefficients_invert_hamiltonian():
    d = np.arange(9.0).reshape(3, 3) - 4
    back, local = pauli_coefficients(pauli_hamiltonian(d))
    np.testing.assert_allclose(back, d, atol=1e-14)
    assert local < 1e-14
    _, local = pauli_coefficients(np.kron(qcore.PAULI_X, qcore.I2))
    assert local == pytest.approx(1.0)


def test_trial_class():
    cls, _ = canonical_decompose(spin_orbit_to_coupling(golden.TRIAL))
    np.testing.assert_allclose(cls.c, golden.CLASS, atol=1e-3)
    assert cls.det_sign == 1


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_decomposition_round_trip(seed):
    d = random_coupling(np.random.default_rng(seed), low=0.05, high=2.0, gap=1e-3, freq_gap=0)
    cls, frame = canonical_decompose(d)
    assert cls.c[0] > cls.c[1] > cls.c[2] >= 0
    assert frame.is_valid(1e-10)
    np.testing.assert_allclose(hamiltonian_from_class(cls, frame), d, atol=1e-10)


def test_negative_determinant_carries_sign():
    d = np.diag([1.0, 0.6, -0.3])
    cls, frame = canonical_decompose(d)
    assert cls.det_sign == -1
    np.testing.assert_allclose(cls.c, (1.0, 0.6, 0.3), atol=1e-14)
    np.testing.assert_allclose(hamiltonian_from_class(cls, frame), d, atol=1e-12)


def test_degenerate_and_singular_inputs():
    with pytest.raises(DegenerateClassError):
        canonical_decompose(np.eye(3))
    with pytest.raises(InvalidInputError):
        canonical_decompose(np.diag([1.0, 0.5, 0.0]))
    with pytest.raises(InvalidInputError):
        canonical_decompose(np.ones((2, 2)))


def test_frame_factorisation():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = Rotation.random(random_state=rng).as_matrix()
        b = Rotation.random(random_state=rng).as_matrix()
        frame = LocalFrame.from_local(qcore.su2_from_so3(a), qcore.su2_from_so3(b))
        again = LocalFrame.from_kq(frame.kq)
        np.testing.assert_allclose(again.k, frame.k, atol=1e-12)


def test_every_so4_frame_is_local():
    rng = np.random.default_rng(5)
    cls = CanonicalClass((1.0, 0.5, 0.2))
    for _ in range(20):
        q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        if np.linalg.det(q) < 0:
            q[:, 0] *= -1
        d = hamiltonian_from_class(cls, LocalFrame(kq=q))
        assert np.allclose(np.linalg.svd(d, compute_uv=False), cls.c, atol=1e-12)


def test_non_orthogonal_frame_is_inconsistent():
    cls = CanonicalClass((1.0, 0.5, 0.2))
    kq = np.eye(4)
    kq[0, 1] = 0.3
    with pytest.raises(InconsistencyError):
        hamiltonian_from_class(cls, LocalFrame(kq=kq))


def test_frequency_identities():
    rng = np.random.default_rng(4)
    for _ in range(100):
        cls = CanonicalClass(tuple(np.sort(rng.uniform(0.1, 2.0, 3))[::-1]))
        w = predicted_frequencies(cls)
        np.testing.assert_allclose([w[k] for k in PAIR_LABELS], FREQUENCY_MATRIX @ np.array(cls.c), atol=1e-12)
        assert w["23"] == pytest.approx(w["13"] + w["12"], abs=1e-12)
        assert w["24"] == pytest.approx(w["14"] + w["12"], abs=1e-12)
        assert w["13"] == pytest.approx(w["34"] + w["14"], abs=1e-12)
        assert w["23"] > w["13"] > w["34"]


def test_trial_frequencies():
    cls, _ = canonical_decompose(spin_orbit_to_coupling(golden.TRIAL))
    w = predicted_frequencies(cls)
    for label, want in golden.FREQUENCIES.items():
        assert w[label] == pytest.approx(want, abs=golden.FREQ_TOL)
