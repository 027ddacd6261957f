"""Canonical class and local frame of the trial spin-orbit coupling.

Builds the 3x3 coupling matrix from (J, beta, gamma), splits it into a
canonical class (c1, c2, c3) and an SO(4) frame, and checks that the two
pieces rebuild the same Hamiltonian.
"""
import numpy as np

from qhamid.golden import TRIAL
from qhamid.model import canonical_decompose, hamiltonian_from_class, predicted_frequencies, spin_orbit_to_coupling

d = spin_orbit_to_coupling(TRIAL)
cls, frame = canonical_decompose(d)
print("coupling matrix d:\n", np.round(d, 5))
print("canonical class c =", np.round(cls.c, 5))
print("frame is SO(4):", np.allclose(frame.kq.T @ frame.kq, np.eye(4)), "det =", round(np.linalg.det(frame.kq), 12))
print("rebuild error:", np.abs(hamiltonian_from_class(cls, frame) - d).max())
for label, w in sorted(predicted_frequencies(cls).items()):
    print(f"  omega{label} = {w:.5f}")
