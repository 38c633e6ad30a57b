"""Exception hierarchy for exclusim."""


class ExclusimError(Exception):
    """Base class for all errors raised by this package."""


class AdmissibilityViolation(ExclusimError):
    """Some gap between consecutive particles is negative."""


class EmptyConfiguration(ExclusimError):
    pass


class DegenerateCircumference(ExclusimError):
    """A radius transform would collapse the ring to zero or negative length."""


class InfeasibleSpec(ExclusimError):
    pass


class EmptyWindow(ExclusimError):
    pass


class WrongModelKind(ExclusimError):
    pass


class SignViolation(ExclusimError):
    """A negative velocity was fed to a nonnegative-only normalization."""


class PostAdmissibilityFailure(ExclusimError):
    """A step produced an inadmissible configuration (implementation bug)."""


class InfeasibleGrid(ExclusimError):
    pass


class NonLatticeInput(ExclusimError):
    pass


class MismatchedReplicas(ExclusimError):
    pass


class CrossingDetected(ExclusimError):
    pass


class RecursionBudgetExceeded(ExclusimError):
    pass


class DegenerateOrdering(ExclusimError):
    """Coincident particles make the tracer jump ill-defined."""


class SchemaError(ExclusimError):
    """Run-config validation failure; carries every error found."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"{path}: {msg}" for path, msg in self.errors]
        super().__init__("invalid run config:\n  " + "\n  ".join(lines))
