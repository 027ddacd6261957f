"""Simulated concurrence traces and their line spectra.

Simulates C^2(t) for the three probe states, then fits the canonical class,
the six line heights per trace and the Bell-basis moduli.
"""
from qhamid import qcore
from qhamid.expsim import simulate_trace
from qhamid.golden import TRIAL
from qhamid.model import PAIR_LABELS, spin_orbit_to_coupling
from qhamid.spectral import analyze_traces

d = spin_orbit_to_coupling(TRIAL)
traces = [simulate_trace(d, sid) for sid in qcore.PROBE_IDS]
print(f"{len(traces)} traces of {traces[0].n} samples, dt = {traces[0].dt}")

spec = analyze_traces(traces)
print("fitted class:", [round(x, 5) for x in spec.cls.c])
for sid, ps in spec.peaksets.items():
    heights = "  ".join(f"p{l}={ps.heights[l]:.3e}" for l in PAIR_LABELS)
    print(f"{sid}: {heights}")
    print(f"      |l| = {spec.moduli[sid].l_abs.round(5)}")
