"""
Virtual concurrence experiment on a hidden Hamiltonian.

A two-qubit register is prepared in a product state, evolved for time ``t``
and its squared concurrence recorded. Sampling on a uniform grid gives a
:class:`ConcurrenceTrace`; traces round-trip through a small CSV format::

    # input_state=psi2 dt=0.25 n=16384 shots=0 seed=0
    0,0
    0.25,0.0123...

Shot noise, when enabled, is a Gaussian approximation to estimating C^2 from
``shots_per_point`` repetitions, with per-sample seeds derived from
``(seed, state_id, sample index)`` so results never depend on evaluation order.
"""
from __future__ import annotations

import math
import re
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import qcore
from .errors import InvalidInputError, TraceParseError
from .model import pauli_hamiltonian

DEFAULT_DT = 0.25
DEFAULT_SAMPLES = 16384


@dataclass(frozen=True)
class NoiseConfig:
    shots_per_point: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.shots_per_point < 0:
            raise InvalidInputError("shots_per_point must be non-negative")

    @property
    def noiseless(self) -> bool:
        return self.shots_per_point == 0


@dataclass
class ConcurrenceTrace:
    input_state_id: str
    times: np.ndarray
    values: np.ndarray
    dt: float
    shots: int = 0
    seed: int = 0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise InvalidInputError("times and values must be matching 1-D arrays")

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def noiseless(self) -> bool:
        return self.shots == 0

    def __eq__(self, other):
        if not isinstance(other, ConcurrenceTrace):
            return NotImplemented
        return (
            self.input_state_id == other.input_state_id
            and self.dt == other.dt
            and self.shots == other.shots
            and self.seed == other.seed
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
        )


def _state_key(state_id: str) -> int:
    return zlib.crc32(state_id.encode("utf-8"))


def _noise_sd(c2, shots: int):
    c2 = np.asarray(c2, dtype=float)
    return np.sqrt(np.maximum(c2 * (1.0 - c2), 0.25 / shots) / shots)


def _point_normal(seed: int, state_id: str, index: int) -> float:
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, _state_key(state_id), index])
    return float(np.random.default_rng(ss).standard_normal())


def _clean_values(d, state, times) -> np.ndarray:
    w, v = qcore.eigh_jacobi(pauli_hamiltonian(d))
    coeff = v.conj().T @ qcore.normalize(state)
    phases = np.exp(-1j * np.outer(times, w))  # exp(-iHt)
    psi_t = (phases * coeff) @ v.T
    return qcore.squared_concurrence_many(psi_t)


def measure_point(d, state, t: float, noise: NoiseConfig | None = None,
                  state_id: str = "", index: int = 0) -> float:
    """Squared concurrence of ``exp(-iHt)|state>``, optionally with shot noise."""
    if not math.isfinite(t):
        raise InvalidInputError("t must be finite")
    h = pauli_hamiltonian(d)
    value = qcore.squared_concurrence(qcore.evolve(h, qcore.normalize(state), t))
    if noise is not None and noise.shots_per_point > 0:
        sd = float(_noise_sd(value, noise.shots_per_point))
        value += sd * _point_normal(noise.seed, state_id, index)
    return value


def _check_grid(dt: float, n: int):
    if not dt > 0:
        raise InvalidInputError("dt must be positive")
    if n < 16 or n & (n - 1):
        raise InvalidInputError(f"sample count must be a power of two >= 16, got {n}")


def simulate_trace(d, state_id: str, dt: float = DEFAULT_DT, n: int = DEFAULT_SAMPLES,
                   noise: NoiseConfig | None = None, state=None, workers: int = 1) -> ConcurrenceTrace:
    """Sample C^2 at ``t_k = k dt`` for ``k = 0 .. n-1``.

    ``state`` defaults to ``resolve_state(state_id)``.
    """
    _check_grid(dt, n)
    noise = noise or NoiseConfig()
    psi = qcore.resolve_state(state_id) if state is None else qcore.normalize(state)
    times = np.arange(n) * dt
    values = _clean_values(d, psi, times)
    if noise.shots_per_point > 0:
        sd = _noise_sd(values, noise.shots_per_point)

        def draw(k):
            return _point_normal(noise.seed, state_id, k)

        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                z = np.fromiter(pool.map(draw, range(n)), float, n)
        else:
            z = np.fromiter(map(draw, range(n)), float, n)
        values = values + sd * z
    return ConcurrenceTrace(state_id, times, values, dt, noise.shots_per_point, noise.seed)


_HEADER_RE = re.compile(
    r"^# input_state=(\S+) dt=(\S+) n=(\d+) shots=(\d+) seed=(-?\d+)\s*$"
)


def write_trace(trace: ConcurrenceTrace, path) -> Path:
    path = Path(path)
    if re.search(r"\s", trace.input_state_id):
        raise InvalidInputError("state id must not contain whitespace")
    lines = [
        f"# input_state={trace.input_state_id} dt={trace.dt!r} n={trace.n} "
        f"shots={trace.shots} seed={trace.seed}"
    ]
    lines += [f"{t:.17g},{v:.17g}" for t, v in zip(trace.times, trace.values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_trace(path) -> ConcurrenceTrace:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise TraceParseError("empty file", line=1)
    m = _HEADER_RE.match(lines[0])
    if m is None:
        raise TraceParseError("malformed header", line=1)
    state_id = m.group(1)
    try:
        dt = float(m.group(2))
    except ValueError:
        raise TraceParseError("dt is not a number", line=1) from None
    n, shots, seed = int(m.group(3)), int(m.group(4)), int(m.group(5))
    times, values = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TraceParseError("expected 't,c2'", line=lineno)
        try:
            t, v = float(parts[0]), float(parts[1])
        except ValueError:
            raise TraceParseError("non-numeric field", line=lineno) from None
        if times:
            step = t - times[-1]
            if step <= 0:
                raise TraceParseError("times are not strictly increasing", line=lineno)
            if abs(step - dt) > 1e-12 * max(abs(t), dt, 1.0):
                raise TraceParseError("times are not uniformly spaced", line=lineno)
        times.append(t)
        values.append(v)
    if len(times) != n:
        raise TraceParseError(f"header declares n={n} but found {len(times)} rows", line=1)
    return ConcurrenceTrace(state_id, np.array(times), np.array(values), dt, shots, seed)


@dataclass
class SimulatedOracle:
    """Answers concurrence measurement requests against a hidden coupling matrix.

    Every call consumes a fresh sample index per state so repeated requests
    see independent noise.
    """

    d: np.ndarray
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    _counter: dict = field(default_factory=dict, repr=False)

    def measure(self, state_id: str, t: float, repeats: int = 1) -> float:
        state = qcore.resolve_state(state_id)
        key = f"oracle/{state_id}"
        values = []
        for _ in range(max(1, repeats)):
            idx = self._counter.get(key, 0)
            self._counter[key] = idx + 1
            values.append(measure_point(self.d, state, t, self.noise, key, idx))
        return float(np.mean(values))
