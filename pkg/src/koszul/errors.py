"""Exception hierarchy shared by all modules.

The CLI maps these onto exit statuses, so every failure a user can trigger
should raise one of them.
"""


class KoszulError(Exception):
    """Base class for all package errors."""

    reason = "error"


class ValidationError(KoszulError, ValueError):
    reason = "validation"


class DegreeError(ValidationError):
    reason = "degree"


class BandwidthOverflowError(KoszulError):
    """A result would need frequencies beyond the space's bandwidth."""

    reason = "bandwidth-overflow"


class ContractViolation(KoszulError):
    """A numerical contract (residual bound, invariance, ...) failed."""

    reason = "contract-violation"


class HessianPreconditionError(ContractViolation):
    reason = "not-hessian"

    def __init__(self, message, defect_norm):
        super().__init__(message)
        self.defect_norm = defect_norm


class NonFiniteGroupError(KoszulError):
    reason = "group-not-finite"
