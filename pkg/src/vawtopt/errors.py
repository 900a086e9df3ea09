"""Exception types shared across the toolkit.

Names follow the operation contracts: each exception corresponds to a
documented failure mode, so callers (and the CLI exit-code mapping) can
distinguish usage problems, data problems, and numerical failures.
"""


class NonFiniteInput(ValueError):
    """An input contains NaN or infinity."""


class ExhaustedRejection(RuntimeError):
    """Rejection sampling acceptance rate collapsed (malformed bounds)."""


class DuplicatePoints(ValueError):
    """A dataset contains duplicate design-point rows at stored precision."""


class SchemaError(ValueError):
    """A CSV file violates its schema. Carries the first offending location."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + loc)


class ConflictingDuplicates(ValueError):
    """Duplicate training inputs with different target values."""


class SingularKernel(RuntimeError):
    """Kernel matrix could not be factorized even after jitter escalation."""


class ShapeMismatch(ValueError):
    """Network weight/bias shapes are inconsistent."""


class DatasetTooSmall(ValueError):
    """Training requires more rows than the dataset provides."""


class TooFewSamples(ValueError):
    """A torque curve needs at least two samples."""


class ZeroWind(ValueError):
    """Efficiency is undefined at zero wind speed."""


class GridTooLarge(ValueError):
    """Brute-force grid would exceed the evaluation guard."""


class NoFeasibleStart(RuntimeError):
    """The optimizer could not obtain a feasible starting point."""


class ZeroBaseline(ValueError):
    """Relative improvement is undefined for a non-positive baseline."""
