"""Shot-noise-limited data.

Every sample is averaged over a finite number of shots; the pipeline switches
to the noisy tolerances, polishes the frame and refits it against the traces.
"""
import numpy as np

from qhamid import NoiseConfig, SimulatedOracle, characterize, qcore, simulate_trace
from qhamid.golden import TRIAL
from qhamid.model import spin_orbit_to_coupling

d = spin_orbit_to_coupling(TRIAL)
for shots in (10_000, 100_000):
    noise = NoiseConfig(shots, seed=1)
    traces = [simulate_trace(d, sid, noise=noise) for sid in qcore.PROBE_IDS]
    res = characterize(traces, SimulatedOracle(d, noise), seed=1)
    if res.status != "unique":
        print(f"shots={shots}: {res.status} ({res.stage}: {res.message})")
        continue
    err = np.abs(np.subtract(res.params.beta, TRIAL.beta)).max()
    print(f"shots={shots}: {res.status}, {len(res.measurements)} measurements, max beta error {err:.1e}")
