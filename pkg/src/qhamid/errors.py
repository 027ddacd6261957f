"""Exception hierarchy shared by all stages of the characterization pipeline."""


class CharacterizationError(Exception):
    """Base class for every error raised by :mod:`qhamid`."""


class InvalidInputError(CharacterizationError, ValueError):
    pass


class DegenerateClassError(CharacterizationError):
    """Canonical coefficients are (nearly) equal or zero; outside the supported regime."""


class InconsistencyError(CharacterizationError):
    pass


class TraceParseError(CharacterizationError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InsufficientPeaksError(CharacterizationError):
    """Fewer spectral peaks than requested; ``found`` holds what was located."""

    def __init__(self, message, found=()):
        super().__init__(message)
        self.found = list(found)


class AssignmentError(CharacterizationError):
    pass


class InconsistentPeaksError(CharacterizationError):
    pass


class CorruptHeightsError(CharacterizationError):
    pass


class DegenerateHeightsError(CharacterizationError):
    pass


class InconsistentModuliError(CharacterizationError):
    pass


class NoCandidatesError(CharacterizationError):
    pass


class MissingMeasurementError(CharacterizationError):
    """A replayed measurement table has no entry for a requested probe."""
