"""Exception hierarchy shared by every module of the package."""


class CoherenceError(Exception):
    """Base class for all errors raised by coherence_wb."""


class ShapeError(CoherenceError, ValueError):
    pass


class DimensionLimit(CoherenceError, ValueError):
    pass


class NumericalFailure(CoherenceError, ArithmeticError):
    pass


class NotCPTNI(CoherenceError, ValueError):
    pass


class WireMismatch(CoherenceError, ValueError):
    pass


class BadBasis(CoherenceError, ValueError):
    pass


class BadPartition(CoherenceError, ValueError):
    pass


class BadRepresentation(CoherenceError, ValueError):
    pass


class BadMechanism(CoherenceError, ValueError):
    pass


class InvalidDecoherence(CoherenceError, ValueError):
    """A process offered as a decoherence process is not causal or not idempotent."""


class MissingAssignment(CoherenceError, KeyError):
    """No decoherence process, representation or mechanism for a requested system."""

    def __str__(self):
        return Exception.__str__(self)


class PreconditionFailed(CoherenceError, RuntimeError):
    """A property test was asked to run on inputs violating its hypotheses."""


class UnsupportedQuery(CoherenceError, ValueError):
    pass


class InputError(CoherenceError, ValueError):
    """A file that cannot be parsed or does not follow the expected layout."""
