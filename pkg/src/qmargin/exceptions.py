"""Exception types raised by the library.

All inherit from :class:`QmarginError`; most also inherit ``ValueError`` so
generic callers that catch ``ValueError`` keep working.
"""


class QmarginError(Exception):
    """Base class for all library errors."""


class SizeError(QmarginError, ValueError):
    """Dimension or qubit-count out of the supported range, or a mismatch."""


class WireError(QmarginError, IndexError):
    """Wire index out of range, or an invalid wire pair."""


class UnitarityError(QmarginError, ValueError):
    """A gate matrix failed the unitarity check."""


class NormalizationError(QmarginError, ValueError):
    """A state vector is not normalized within tolerance."""


class ShapeError(QmarginError, ValueError):
    """Parameter array shape does not match the circuit."""


class DomainError(QmarginError, ValueError):
    """A loss function was evaluated outside its domain."""


class EmptyDatasetError(QmarginError, ValueError):
    """An operation requiring data received an empty dataset."""


class UnsupportedConfigurationError(QmarginError, ValueError):
    """Operation requires a product-form circuit but got entangling layers."""


class DegenerateShrinkageError(QmarginError, ZeroDivisionError):
    """Shrinkage factor is zero; the interval half-width is undefined."""


class LambdaDegenerateError(QmarginError, ValueError):
    """Bit-flip rate p >= 1/4 makes the penalty weight 4p/(1-4p) degenerate."""


class OptimizationError(QmarginError, RuntimeError):
    """Objective diverged during fitting; carries the trace so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class InfeasibleSpecError(QmarginError, ValueError):
    """Dataset generation rejected more than 99% of candidate draws."""
