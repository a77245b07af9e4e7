"""Exception hierarchy.

Every failure the library can report maps onto one of the classes below; the
command-line front end turns them into exit codes (input errors -> 2,
numerical failures -> 3, search exhaustion -> 4).
"""


class SubRiemError(Exception):
    """Base class for all library errors."""

    code = "ERROR"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        return {"error": self.code, "message": str(self), "details": self.details}


class InputError(SubRiemError, ValueError):
    """Bad arguments: dimension mismatch, failed precondition, unknown key."""

    code = "INPUT_ERROR"


class DomainError(InputError):
    """A time or stencil falls outside where the quantity is defined."""

    code = "DOMAIN_ERROR"


class NotStronglyNormal(InputError):
    """The ray through a covector carries an abnormal segment."""

    code = "NOT_STRONGLY_NORMAL"


class NumericalError(SubRiemError, ArithmeticError):
    code = "NUMERICAL_ERROR"


class IntegrationError(NumericalError):
    """Step size underflow or non-finite state while integrating."""

    code = "INTEGRATION_FAILURE"

    def __init__(self, message, last_time=None, **details):
        super().__init__(message, last_time=last_time, **details)
        self.last_time = last_time


class SingularJacobian(NumericalError):
    code = "SINGULAR_JACOBIAN"


class NoConvergence(NumericalError):
    code = "NO_CONVERGENCE"


class BranchLost(NumericalError):
    code = "BRANCH_LOST"


class Unresolved(NumericalError):
    code = "UNRESOLVED"


class InconclusiveOrder(NumericalError):
    """The two vanishing-order estimators disagree."""

    code = "INCONCLUSIVE"

    def __init__(self, message, loglog=None, derivative=None, **details):
        super().__init__(message, loglog=loglog, derivative=derivative, **details)
        self.loglog = loglog
        self.derivative = derivative


class NotFound(SubRiemError):
    """A randomized search exhausted its budget; not a refutation."""

    code = "NOT_FOUND"

    def __init__(self, message, best=None, **details):
        super().__init__(message, best=best, **details)
        self.best = best
