"""
Representations of a fully non-local two-qubit Hamiltonian.

``H = sum_ij d[i, j] sigma_i (x) sigma_j`` is stored as the real 3x3 coupling
matrix ``d``. The canonical (Cartan) form ``H = K^dagger (c1 XX + c2 YY + c3 ZZ) K``
splits it into a :class:`CanonicalClass` and a :class:`LocalFrame`.

Spin-orbit exchange ``J [S1.S2 + beta.(S1 x S2) + S1 Gamma S2]`` maps onto ``d``
with the spin operators taken to be the Pauli matrices themselves.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import qcore
from .errors import DegenerateClassError, InconsistencyError, InvalidInputError

#: Frequency labels, in the fixed order used for every six-peak table.
PAIRS = ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4))
PAIR_LABELS = tuple(f"{i}{j}" for i, j in PAIRS)

#: Rows map (c1, c2, c3) to the six frequencies for a positive-determinant class.
FREQUENCY_MATRIX = 4.0 * np.array(
    [
        [0, 1, -1],   # w12 = 4(c2 - c3)
        [1, 0, 1],    # w13 = 4(c1 + c3)
        [1, -1, 0],   # w14 = 4(c1 - c2)
        [1, 1, 0],    # w23 = 4(c1 + c2)
        [1, 0, -1],   # w24 = 4(c1 - c3)
        [0, 1, 1],    # w34 = 4(c2 + c3)
    ],
    dtype=float,
)

GAMMA_SLOTS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))

_LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _LEVI_CIVITA[_i, _j, _k] = 1.0
    _LEVI_CIVITA[_i, _k, _j] = -1.0

DEGENERACY_MARGIN = 1e-9


@dataclass(frozen=True)
class SpinOrbitParams:
    """Exchange scale ``J``, DM vector ``beta`` and symmetric ``gamma``.

    ``gamma`` holds the six independent entries ordered
    ``(xx, yy, zz, xy, xz, yz)``.
    """

    J: float
    beta: tuple
    gamma: tuple

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(x) for x in self.beta))
        object.__setattr__(self, "gamma", tuple(float(x) for x in self.gamma))
        if len(self.beta) != 3 or len(self.gamma) != 6:
            raise InvalidInputError("beta needs 3 entries and gamma 6")

    @property
    def gamma_matrix(self) -> np.ndarray:
        g = np.zeros((3, 3))
        for value, (i, j) in zip(self.gamma, GAMMA_SLOTS):
            g[i, j] = g[j, i] = value
        return g


def spin_orbit_to_coupling(p: SpinOrbitParams) -> np.ndarray:
    antisym = np.einsum("i,ijk->jk", np.asarray(p.beta), _LEVI_CIVITA)
    return p.J * (np.eye(3) + antisym + p.gamma_matrix)


def coupling_to_spin_orbit(d, J: float) -> SpinOrbitParams:
    """Invert :func:`spin_orbit_to_coupling` for a known exchange scale ``J``."""
    if J == 0:
        raise InvalidInputError("J must be non-zero")
    d = np.asarray(d, dtype=float) / J
    sym = 0.5 * (d + d.T) - np.eye(3)
    antisym = 0.5 * (d - d.T)
    beta = 0.5 * np.einsum("ijk,jk->i", _LEVI_CIVITA, antisym)
    gamma = [sym[i, j] for i, j in GAMMA_SLOTS]
    return SpinOrbitParams(J=J, beta=beta, gamma=gamma)


def pauli_hamiltonian(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.shape != (3, 3) or not np.all(np.isfinite(d)):
        raise InvalidInputError("coupling matrix must be a finite 3x3 array")
    h = np.zeros((4, 4), dtype=complex)
    for i in range(3):
        for j in range(3):
            h += d[i, j] * qcore.PAULI_PRODUCTS[i][j]
    return h


def pauli_coefficients(h):
    """Project a 4x4 operator onto the Pauli-product basis.

    Returns ``(d, local)`` where ``local`` is the largest coefficient on the
    identity or single-qubit terms, i.e. what ``d`` fails to capture.
    """
    h = np.asarray(h, dtype=complex)
    basis = (qcore.I2,) + qcore.PAULIS
    coeffs = np.empty((4, 4))
    for a, sa in enumerate(basis):
        for b, sb in enumerate(basis):
            coeffs[a, b] = 0.25 * np.trace(np.kron(sa, sb) @ h).real
    local = max(np.abs(coeffs[0, :]).max(), np.abs(coeffs[:, 0]).max())
    return coeffs[1:, 1:].copy(), float(local)


@dataclass(frozen=True)
class CanonicalClass:
    """Canonical coefficients ``c1 >= c2 >= c3 >= 0`` plus ``sign(det d)``."""

    c: tuple
    det_sign: int = 1

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(x) for x in self.c))

    @property
    def signed(self) -> np.ndarray:
        """Coefficients with ``c3`` carrying the determinant sign."""
        return np.array([self.c[0], self.c[1], self.det_sign * self.c[2]])

    @property
    def eigenvalues(self) -> np.ndarray:
        return qcore.canonical_eigenvalues(self.signed)

    def canonical_hamiltonian(self) -> np.ndarray:
        c1, c2, c3 = self.signed
        pp = qcore.PAULI_PRODUCTS
        return c1 * pp[0][0] + c2 * pp[1][1] + c3 * pp[2][2]


@dataclass(frozen=True)
class LocalFrame:
    """Local rotation ``K = u1 (x) u2`` and its real SO(4) image ``kq = Q^dagger K Q``.

    Frames recovered from spectral data only know ``kq``; ``u1``/``u2`` are
    then ``None`` until :meth:`from_kq` factorizes them.
    """

    kq: np.ndarray
    u1: Optional[np.ndarray] = None
    u2: Optional[np.ndarray] = None

    @property
    def k(self) -> np.ndarray:
        if self.u1 is not None and self.u2 is not None:
            return np.kron(self.u1, self.u2)
        return qcore.from_magic(self.kq)

    @classmethod
    def from_local(cls, u1, u2) -> "LocalFrame":
        kq = qcore.to_magic(np.kron(u1, u2))
        return cls(kq=np.real(kq), u1=np.asarray(u1), u2=np.asarray(u2))

    @classmethod
    def from_kq(cls, kq) -> "LocalFrame":
        """Factorize ``Q kq Q^dagger`` into determinant-one single-qubit unitaries."""
        kq = np.asarray(kq, dtype=float)
        k = qcore.from_magic(kq)
        # K[(a b), (c d)] = u1[a, c] u2[b, d]; regroup into the rank-one matrix vec(u1) vec(u2)^T
        m = k.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
        uu, s, vh = np.linalg.svd(m)
        u1 = (uu[:, 0] * np.sqrt(s[0])).reshape(2, 2)
        u2 = (vh[0, :] * np.sqrt(s[0])).reshape(2, 2)
        # rescale each factor to unit determinant; the leftover phase is a global +-1
        ph = np.sqrt(np.linalg.det(u1))
        u1, u2 = u1 / ph, u2 * ph
        u1 = qcore.su2_from_so3(qcore.adjoint_so3(u1))
        u2 = qcore.su2_from_so3(qcore.adjoint_so3(u2))
        if np.abs(np.kron(u1, u2) - k).max() > np.abs(np.kron(u1, u2) + k).max():
            u2 = -u2
        return cls(kq=kq, u1=u1, u2=u2)

    def is_valid(self, atol=1e-8) -> bool:
        kq = np.asarray(self.kq)
        return bool(
            np.allclose(kq.T @ kq, np.eye(4), atol=atol) and abs(np.linalg.det(kq) - 1.0) < atol
        )


def _svd_so3(d: np.ndarray):
    """``d = a @ diag(s) @ b.T`` with ``a, b`` in SO(3), ``s`` descending.

    The smallest entry of ``s`` carries ``sign(det d)``.
    """
    w, b = qcore.eigh_jacobi(d.T @ d)
    w, b = w[::-1], b[:, ::-1].copy()
    if w[-1] <= 0:
        raise InvalidInputError("coupling matrix is singular")
    s = np.sqrt(w)
    a = (d @ b) / s
    if np.linalg.det(b) < 0:
        b[:, 2] *= -1
        a[:, 2] *= -1
    if np.linalg.det(a) < 0:
        a[:, 2] *= -1
        s[2] = -s[2]
    return a, s, b


def canonical_decompose(d):
    """Cartan decomposition of a coupling matrix.

    Returns ``(cls, frame)`` such that ``K^dagger H_a K`` reproduces the
    Hamiltonian of ``d``, where ``H_a`` uses ``cls.signed``.
    """
    d = np.asarray(d, dtype=float)
    if d.shape != (3, 3) or not np.all(np.isfinite(d)):
        raise InvalidInputError("coupling matrix must be a finite 3x3 array")
    scale = np.abs(d).max()
    if scale == 0 or abs(np.linalg.det(d)) < 1e-12 * scale**3:
        raise InvalidInputError("coupling matrix is singular")
    a, s, b = _svd_so3(d)
    c = np.abs(s)
    if c[0] - c[1] < DEGENERACY_MARGIN or c[1] - c[2] < DEGENERACY_MARGIN:
        raise DegenerateClassError(f"canonical coefficients {c} are not pairwise distinct")
    cls = CanonicalClass(c=tuple(c), det_sign=1 if s[2] > 0 else -1)
    # u sigma_j u^dagger = sum_i R_ij sigma_i, so K^dagger H_a K has d = R1^T diag(c) R2
    u1 = qcore.su2_from_so3(a.T)
    u2 = qcore.su2_from_so3(b.T)
    return cls, LocalFrame.from_local(u1, u2)


def hamiltonian_from_class(cls: CanonicalClass, frame: LocalFrame) -> np.ndarray:
    """Coupling matrix of ``K^dagger H_a K``."""
    k = frame.k
    h = k.conj().T @ cls.canonical_hamiltonian() @ k
    d, local = pauli_coefficients(h)
    if local > 1e-8:
        raise InconsistencyError(f"frame produced local terms of size {local:.3g}")
    return d


def predicted_frequencies(cls: CanonicalClass) -> dict:
    """The six peak frequencies ``w_ij = 2 |lambda_i - lambda_j|`` keyed by label."""
    lam = cls.eigenvalues
    return {f"{i}{j}": float(2.0 * abs(lam[i - 1] - lam[j - 1])) for i, j in PAIRS}
