import itertools

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from qhamid import golden, qcore
from qhamid.expsim import simulate_trace
from qhamid.model import FREQUENCY_MATRIX, spin_orbit_to_coupling

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def random_coupling(rng, low=0.2, high=1.4, gap=0.02, freq_gap=0.05):
    """Random d with distinct canonical values, det > 0 and well-separated lines.

    ``high`` keeps 4(c1 + c2) below the default grid's Nyquist limit (~12.6);
    ``freq_gap`` keeps all six line frequencies resolvable.
    """
    while True:
        c = np.sort(rng.uniform(low, high, 3))[::-1]
        if np.min(-np.diff(c)) < gap:
            continue
        w = FREQUENCY_MATRIX @ c
        if min(abs(a - b) for a, b in itertools.combinations(w, 2)) < freq_gap:
            continue
        a = Rotation.random(random_state=rng).as_matrix()
        b = Rotation.random(random_state=rng).as_matrix()
        return a @ np.diag(c) @ b.T


def random_su2(rng):
    return qcore.su2_from_so3(Rotation.random(random_state=rng).as_matrix())


@pytest.fixture(scope="session")
def trial_d():
    return spin_orbit_to_coupling(golden.TRIAL)


@pytest.fixture(scope="session")
def trial_traces(trial_d):
    return [simulate_trace(trial_d, sid) for sid in qcore.PROBE_IDS]


@pytest.fixture(scope="session")
def paper_scenario():
    return golden.run_paper_scenario()
