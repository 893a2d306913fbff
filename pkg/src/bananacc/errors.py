"""Exception types raised across the package."""


class BananaError(Exception):
    """Base class for all package errors."""


class PropagationError(BananaError, RuntimeError):
    """Numerical integration of the two-body flow failed."""


class CollisionError(PropagationError):
    """Trajectory radius fell below the collision guard."""


class StepUnderflowError(PropagationError):
    """Adaptive step size collapsed below machine resolution."""


class MomentPropagationError(PropagationError):
    """A cubature point failed to propagate.

    A deterministic rule with a missing point would be silently biased, so
    the offending point index is carried along instead.
    """

    def __init__(self, index: int, reason: str):
        super().__init__(f"cubature point {index} failed to propagate: {reason}")
        self.index = index
        self.reason = reason


class ContourError(BananaError, ValueError):
    """Contour coefficients could not be formed for a slice."""


class ScenarioError(BananaError, ValueError):
    """Scenario configuration is malformed or violates invariants."""

    def __init__(self, problems: list[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.problems))


class SolveError(BananaError, RuntimeError):
    """Constraint evaluation failed for an optimizer iterate."""

    def __init__(self, message: str, u0=None):
        super().__init__(message if u0 is None else f"{message} (u0={list(u0)})")
        self.u0 = u0
