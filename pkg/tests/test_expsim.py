import numpy as np
import pytest

from qhamid import qcore
from qhamid.errors import InvalidInputError, TraceParseError
from qhamid.expsim import (
    NoiseConfig,
    SimulatedOracle,
    measure_point,
    read_trace,
    simulate_trace,
    write_trace,
)


def test_measure_point_matches_trial_values(trial_d):
    psi3 = qcore.resolve_state("psi3")
    assert measure_point(trial_d, psi3, 1.0) == pytest.approx(0.150, abs=1e-3)
    assert measure_point(trial_d, psi3, 0.0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(InvalidInputError):
        measure_point(trial_d, psi3, float("nan"))


def test_trace_matches_pointwise_evaluation(trial_d):
    tr = simulate_trace(trial_d, "psi2", dt=0.5, n=64)
    assert tr.n == 64 and tr.noiseless
    for k in (0, 1, 17, 63):
        assert tr.values[k] == pytest.approx(measure_point(trial_d, qcore.resolve_state("psi2"), tr.times[k]), abs=1e-12)


def test_grid_validation(trial_d):
    with pytest.raises(InvalidInputError):
        simulate_trace(trial_d, "psi1", n=100)
    with pytest.raises(InvalidInputError):
        simulate_trace(trial_d, "psi1", dt=0.0, n=64)
    with pytest.raises(InvalidInputError):
        NoiseConfig(shots_per_point=-1)


def test_noise_is_seeded_and_order_independent(trial_d):
    noise = NoiseConfig(1000, seed=42)
    a = simulate_trace(trial_d, "psi1", n=256, noise=noise)
    b = simulate_trace(trial_d, "psi1", n=256, noise=noise, workers=4)
    assert a == b
    c = simulate_trace(trial_d, "psi1", n=256, noise=NoiseConfig(1000, seed=43))
    assert not np.array_equal(a.values, c.values)
    clean = simulate_trace(trial_d, "psi1", n=256)
    # prefix of a longer trace sees the same per-index noise
    longer = simulate_trace(trial_d, "psi1", n=512, noise=noise)
    np.testing.assert_array_equal(longer.values[:256], a.values)
    z = (a.values - clean.values) / np.sqrt(np.maximum(clean.values * (1 - clean.values), 0.25 / 1000) / 1000)
    assert abs(z.mean()) < 0.3 and 0.8 < z.std() < 1.2


def test_trace_round_trip(tmp_path, trial_d):
    tr = simulate_trace(trial_d, "psi2", n=128, noise=NoiseConfig(10, 7))
    path = write_trace(tr, tmp_path / "t.csv")
    assert path.read_text().splitlines()[0] == "# input_state=psi2 dt=0.25 n=128 shots=10 seed=7"
    assert read_trace(path) == tr


@pytest.mark.parametrize(
    "body, line",
    [
        ("", 1),
        ("# bogus\n0,0\n", 1),
        ("# input_state=psi1 dt=0.25 n=2 shots=0 seed=0\n0,0\n0.5,1\n", 3),
        ("# input_state=psi1 dt=0.25 n=2 shots=0 seed=0\n0,0\n0,1\n", 3),
        ("# input_state=psi1 dt=0.25 n=2 shots=0 seed=0\n0,0\n0.25,x\n", 3),
        ("# input_state=psi1 dt=0.25 n=2 shots=0 seed=0\n0,0,1\n", 2),
        ("# input_state=psi1 dt=0.25 n=3 shots=0 seed=0\n0,0\n0.25,1\n", 1),
    ],
)
def test_trace_parse_errors_report_line(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(TraceParseError) as info:
        read_trace(path)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_oracle_repeats_draw_fresh_noise(trial_d):
    oracle = SimulatedOracle(trial_d, NoiseConfig(100, 1))
    first = oracle.measure("psi1", 1.0)
    second = oracle.measure("psi1", 1.0)
    assert first != second
    clean = SimulatedOracle(trial_d).measure("psi1", 1.0, repeats=3)
    assert clean == pytest.approx(0.581, abs=1e-3)
