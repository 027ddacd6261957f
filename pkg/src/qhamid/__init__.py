"""Reconstruct a two-qubit exchange Hamiltonian from concurrence time series."""
from .errors import CharacterizationError
from .expsim import ConcurrenceTrace, NoiseConfig, SimulatedOracle, simulate_trace
from .model import CanonicalClass, LocalFrame, SpinOrbitParams, canonical_decompose, spin_orbit_to_coupling
from .reconstruct import CharacterizationResult, Tolerances, characterize

__all__ = [
    "CanonicalClass",
    "CharacterizationError",
    "CharacterizationResult",
    "ConcurrenceTrace",
    "LocalFrame",
    "NoiseConfig",
    "SimulatedOracle",
    "SpinOrbitParams",
    "Tolerances",
    "canonical_decompose",
    "characterize",
    "simulate_trace",
    "spin_orbit_to_coupling",
]
__version__ = "0.1.0"
