"""From Bell moduli to a short list of candidate Hamiltonians.

Each row of the frame is pinned down up to signs by four mu values; the
sign choices are enumerated, pruned by orthogonality, and collapsed to
distinct Hamiltonians.
"""
import numpy as np

from qhamid.golden import TRIAL
from qhamid.model import spin_orbit_to_coupling
from qhamid.reconstruct import Tolerances, analytic_moduli, frame_candidates

d = spin_orbit_to_coupling(TRIAL)
cls, moduli = analytic_moduli(d)
mu, cset = frame_candidates(cls, moduli, Tolerances())
print("mu (x1e-2):\n", np.round(mu * 100, 4))
print("audit:", cset.audit)
hit = [np.abs(c.d - d).max() for c in cset.candidates]
print(f"{len(cset.candidates)} distinct candidates; closest to truth differs by {min(hit):.1e}")
