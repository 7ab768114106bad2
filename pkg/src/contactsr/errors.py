"""Exception hierarchy shared by all contactsr modules."""


class ContactSRError(Exception):
    """Base class for every error raised by this package."""


class ExprSyntaxError(ContactSRError):
    """Malformed expression source; carries 1-based line/column."""

    def __init__(self, message, line, column):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnknownFunction(ContactSRError):
    """A function name outside the supported set {sin, cos, sqrt, exp, ln}."""


class EvaluationError(ContactSRError):
    """Numeric evaluation hit a domain violation or an unbound name."""


class NonlinearInUnknowns(ContactSRError):
    """solve_linear was given an equation of degree > 1 in an unknown."""


class InconsistentSystem(ContactSRError):
    """A linear system reduced to 'nonzero constant = 0'."""


class RankVariesOverDomain(ContactSRError):
    """The velocity Hessian changes rank across the sampling box."""


class SingularLagrangian(ContactSRError):
    """An operation requiring an invertible velocity Hessian got a singular one."""


class CoefficientMatchFailure(ContactSRError):
    """Internal consistency guard: a coefficient identity that must hold failed."""


class InconsistentDynamics(ContactSRError):
    """The constraint algorithm produced an unsatisfiable constraint."""


class ReductionFailure(ContactSRError):
    """A constraint could not be solved for any single designated variable."""


class IterationCapExceeded(ContactSRError):
    """The constraint algorithm did not stabilise within its iteration cap."""


class VelocityEliminationFailure(ContactSRError):
    """Some velocity cannot be written in momentum-side coordinates."""


class InitOffConstraint(ContactSRError):
    """An initial state violates a constraint of the final submanifold."""

    def __init__(self, constraint, residual):
        super().__init__(
            f"initial state violates constraint '{constraint}' by {residual:.3e}"
        )
        self.constraint = constraint
        self.residual = residual


class NonFiniteState(ContactSRError):
    """Integration produced an infinite or NaN state component."""


class SchemaError(ContactSRError):
    """A system file is missing or misusing a required key."""


class MissingGolden(ContactSRError):
    """No golden sidecar file exists for the requested system."""
