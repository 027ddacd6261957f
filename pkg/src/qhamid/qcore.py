"""
Dense two-qubit linear algebra and quantum primitives.

States are length-4 complex arrays in the computational basis
``|00>, |01>, |10>, |11>`` (left factor = qubit 1). Operators are 4x4 complex
arrays. Everything here is a pure function of its arguments.

Time evolution convention
-------------------------
:func:`matrix_exp_i` is the bare exponential ``exp(+iHt)``. Physical evolution
of a state under a Hamiltonian goes through :func:`propagator`, which is
``exp(-iHt)``; the reference concurrence values for the spin-orbit trial
Hamiltonian are only reproduced with this sign.
"""
from __future__ import annotations

import math
import re

import numpy as np

from .errors import InvalidInputError

SQRT1_2 = 1.0 / math.sqrt(2.0)

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)

#: ``PAULI_PRODUCTS[i][j]`` is sigma_i (x) sigma_j.
PAULI_PRODUCTS = tuple(tuple(np.kron(a, b) for b in PAULIS) for a in PAULIS)
YY = PAULI_PRODUCTS[1][1]


def _as_state(state) -> np.ndarray:
    psi = np.asarray(state, dtype=complex).reshape(-1)
    if psi.shape != (4,):
        raise InvalidInputError(f"two-qubit state needs 4 amplitudes, got shape {psi.shape}")
    return psi


def normalize(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex)
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or norm == 0.0:
        raise InvalidInputError("cannot normalize a zero-norm vector")
    return v / norm


def product_state(left, right) -> np.ndarray:
    """Normalized tensor product of two single-qubit amplitude pairs."""
    a = np.asarray(left, dtype=complex).reshape(-1)
    b = np.asarray(right, dtype=complex).reshape(-1)
    if a.shape != (2,) or b.shape != (2,):
        raise InvalidInputError("each factor must be an amplitude pair")
    return np.kron(normalize(a), normalize(b))


def bloch_qubit(theta: float, phi: float) -> np.ndarray:
    """``cos(theta/2)|0> + exp(i phi) sin(theta/2)|1>``."""
    return np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])


# The four reference probes, written exactly as prepared (normalization applied).
_PROBE_FACTORS = {
    "psi1": ((1j, 1), (1, 1j)),
    "psi2": ((1, 1), (0, 1)),
    "psi3": ((0, 1), (1, 1)),
    "psi4": ((0, 1), (1, -1j)),
}
PROBE_IDS = ("psi1", "psi2", "psi3")
_BLOCH_RE = re.compile(r"^bloch:([^,]+),([^,]+),([^,]+),([^,]+)$")


def probe_state(name: str) -> np.ndarray:
    """Return one of the named reference probes ``psi1`` .. ``psi4``."""
    try:
        left, right = _PROBE_FACTORS[name]
    except KeyError:
        raise InvalidInputError(f"unknown probe state {name!r}") from None
    return product_state(left, right)


def bloch_state_id(theta1, phi1, theta2, phi2) -> str:
    return "bloch:" + ",".join(repr(float(x)) for x in (theta1, phi1, theta2, phi2))


def resolve_state(state_id: str) -> np.ndarray:
    """Map a state identifier to its amplitudes.

    Accepts the named probes and ``bloch:t1,p1,t2,p2`` product states.
    """
    if state_id in _PROBE_FACTORS:
        return probe_state(state_id)
    m = _BLOCH_RE.match(state_id)
    if m is None:
        raise InvalidInputError(f"unrecognised state id {state_id!r}")
    t1, p1, t2, p2 = (float(g) for g in m.groups())
    return np.kron(bloch_qubit(t1, p1), bloch_qubit(t2, p2))


def squared_concurrence(state) -> float:
    """``|<phi*| Y(x)Y |phi>|^2`` for a normalized pure state."""
    psi = _as_state(state)
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > 1e-6:
        raise InvalidInputError(f"state is not normalized (norm^2 = {norm:.3g})")
    value = abs(psi @ YY @ psi) ** 2
    if value > 1.0 and value - 1.0 < 1e-12:
        value = 1.0
    return float(value)


def squared_concurrence_many(states: np.ndarray) -> np.ndarray:
    """Vectorised concurrence for an ``(..., 4)`` stack of normalized states."""
    psi = np.asarray(states, dtype=complex)
    # Y(x)Y has entries -1 at (0,3),(3,0) and +1 at (1,2),(2,1)
    amp = 2.0 * (psi[..., 1] * psi[..., 2] - psi[..., 0] * psi[..., 3])
    return np.minimum(np.abs(amp) ** 2, 1.0)


def is_hermitian(op, atol=1e-12) -> bool:
    a = np.asarray(op)
    return a.shape[0] == a.shape[1] and np.allclose(a, a.conj().T, rtol=0.0, atol=atol)


def is_unitary(op, atol=1e-10) -> bool:
    a = np.asarray(op)
    return np.allclose(a.conj().T @ a, np.eye(a.shape[0]), rtol=0.0, atol=atol)


def eigh_jacobi(a, tol=1e-14, max_sweeps=100):
    """Eigendecomposition of a small Hermitian matrix by cyclic Jacobi rotations.

    Returns ``(w, v)`` with ascending eigenvalues ``w`` and unitary ``v`` such
    that ``a @ v = v @ diag(w)``. Real symmetric input stays real.
    """
    a = np.array(a, dtype=complex if np.iscomplexobj(a) else float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise InvalidInputError("eigh_jacobi needs a square matrix")
    if not is_hermitian(a, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise InvalidInputError("matrix is not Hermitian")
    a = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=a.dtype)
    thresh = tol * max(1.0, np.linalg.norm(a))
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off < thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag < 1e-300:
                    continue
                phase = apq / mag
                tau = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # rotation r: r[p,p]=r[q,q]=c, r[p,q]=s*phase, r[q,p]=-s*conj(phase)
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * np.conj(phase) * col_q
                a[:, q] = s * phase * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * phase * row_q
                a[q, :] = s * np.conj(phase) * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * np.conj(phase) * vq
                v[:, q] = s * phase * vp + c * vq
    w = np.diag(a).real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def matrix_exp_i(h, t: float) -> np.ndarray:
    """``exp(+i H t)`` for Hermitian ``H`` via its eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, atol=1e-12 * max(1.0, np.abs(h).max())):
        raise InvalidInputError("matrix_exp_i requires a Hermitian matrix")
    w, v = eigh_jacobi(h)
    return (v * np.exp(1j * w * t)) @ v.conj().T


def propagator(h, t: float) -> np.ndarray:
    """Evolution operator ``U(t) = exp(-iHt)``."""
    return matrix_exp_i(h, -t)


def evolve(h, state, t: float) -> np.ndarray:
    return propagator(h, t) @ _as_state(state)


def _magic_basis() -> np.ndarray:
    s = SQRT1_2
    cols = [
        [s, 0, 0, s],            # Phi+      lambda1 =  c1 - c2 + c3
        [0, 1j * s, 1j * s, 0],  # i Psi+    lambda2 =  c1 + c2 - c3
        [0, s, -s, 0],           # Psi-      lambda3 = -c1 - c2 - c3
        [1j * s, 0, 0, -1j * s], # i Phi-    lambda4 = -c1 + c2 + c3
    ]
    return np.array(cols, dtype=complex).T


_Q = _magic_basis()


def magic_basis() -> np.ndarray:
    """Phased Bell basis ``Q`` (columns) in which local unitaries are real SO(4).

    Column ``k`` is the eigenvector of ``c1 XX + c2 YY + c3 ZZ`` with
    eigenvalue ``lambda_k`` as returned by :func:`canonical_eigenvalues`.
    """
    return _Q.copy()


def canonical_eigenvalues(c) -> np.ndarray:
    c1, c2, c3 = c
    return np.array([c1 - c2 + c3, c1 + c2 - c3, -c1 - c2 - c3, -c1 + c2 + c3])


def to_magic(op) -> np.ndarray:
    """``Q^dagger op Q``."""
    return _Q.conj().T @ np.asarray(op) @ _Q


def from_magic(op) -> np.ndarray:
    return _Q @ np.asarray(op) @ _Q.conj().T


def adjoint_so3(u) -> np.ndarray:
    """Rotation matrix ``R_ij = tr(sigma_i u sigma_j u^dagger) / 2`` of an SU(2) element."""
    u = np.asarray(u, dtype=complex)
    r = np.empty((3, 3))
    for j, sj in enumerate(PAULIS):
        conj = u @ sj @ u.conj().T
        for i, si in enumerate(PAULIS):
            r[i, j] = 0.5 * np.trace(si @ conj).real
    return r


def _quaternion_from_rotation(r: np.ndarray) -> np.ndarray:
    # Shepperd's method: pick the largest diagonal combination for stability.
    tr = np.trace(r)
    cand = np.array([tr, r[0, 0], r[1, 1], r[2, 2]])
    k = int(np.argmax(cand))
    q = np.empty(4)
    if k == 0:
        q[0] = 0.5 * math.sqrt(max(1.0 + tr, 0.0))
        f = 0.25 / q[0]
        q[1] = (r[2, 1] - r[1, 2]) * f
        q[2] = (r[0, 2] - r[2, 0]) * f
        q[3] = (r[1, 0] - r[0, 1]) * f
    else:
        i = k - 1
        j, l = (i + 1) % 3, (i + 2) % 3
        qi = 0.5 * math.sqrt(max(1.0 + r[i, i] - r[j, j] - r[l, l], 0.0))
        f = 0.25 / qi
        q[0] = (r[l, j] - r[j, l]) * f
        q[1 + i] = qi
        q[1 + j] = (r[j, i] + r[i, j]) * f
        q[1 + l] = (r[l, i] + r[i, l]) * f
    return q / np.linalg.norm(q)


def su2_from_so3(r) -> np.ndarray:
    """Lift a rotation to SU(2), choosing the sign whose quaternion leads positive.

    The returned ``u = q0 I - i (q . sigma)`` satisfies ``adjoint_so3(u) == r``.
    """
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        raise InvalidInputError("rotation must be 3x3")
    if not np.allclose(r.T @ r, np.eye(3), atol=1e-8) or abs(np.linalg.det(r) - 1.0) > 1e-8:
        raise InvalidInputError("matrix is not special orthogonal")
    q = _quaternion_from_rotation(r)
    for x in q:
        if abs(x) > 1e-12:
            if x < 0:
                q = -q
            break
    return q[0] * I2 - 1j * (q[1] * PAULI_X + q[2] * PAULI_Y + q[3] * PAULI_Z)
