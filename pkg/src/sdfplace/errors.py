"""Exception types raised across the pipeline."""


class SdfPlaceError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"
    exit_code = 1


class InputError(SdfPlaceError):
    """Malformed or unusable input data (files, configs, arguments)."""

    category = "input"
    exit_code = 3


class ComputationError(SdfPlaceError):
    """A stage could not produce a result for otherwise valid input."""

    category = "computation"
    exit_code = 4


class EmptyInput(InputError):
    pass


class NonPositiveSigma(InputError):
    pass


class DegenerateSpec(InputError):
    pass


class UnsupportedVersion(InputError):
    pass


class LengthMismatch(InputError):
    pass


class EmptyTarget(InputError):
    pass


class InsufficientSubmaps(InputError):
    pass


class EmptyCarve(ComputationError):
    pass


class InsufficientSupport(ComputationError):
    pass


class DegenerateTensor(ComputationError):
    pass


class DegenerateTriple(ComputationError):
    pass


class NoValidCandidate(ComputationError):
    pass
