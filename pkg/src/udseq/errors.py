"""Exception hierarchy. CLI exit codes are attached to each class."""


class UdseqError(Exception):
    exit_code = 2


class InputError(UdseqError):
    """Malformed or schema-violating input."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class MetricAxiomError(InputError):
    pass


class DomainError(UdseqError, ValueError):
    pass


class RangeError(UdseqError, IndexError):
    pass


class ShapeError(UdseqError, ValueError):
    pass


class SpaceMismatchError(UdseqError, ValueError):
    pass


class MassError(UdseqError, ValueError):
    pass


class DegenerateError(UdseqError, ValueError):
    pass


class CoverageError(UdseqError, ValueError):
    pass


class CapacityError(UdseqError):
    exit_code = 3


class HorizonError(UdseqError):
    """The materialized horizon is too short; ``best`` holds the closest value reached."""

    exit_code = 3

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NoCertificateError(UdseqError):
    exit_code = 1

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
