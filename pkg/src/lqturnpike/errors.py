"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: AssumptionViolation -> 2,
NumericalError -> 3, anything structural in the inputs -> 1.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(ToolkitError):
    """Inconsistent or invalid matrix/vector dimensions."""


class NumericalError(ToolkitError):
    """A numerical procedure failed (step underflow, singular solve, ...)."""


class AssumptionViolation(ToolkitError):
    """A named solvability assumption does not hold for the given data.

    ``assumption`` is a short machine-readable tag, e.g. ``"stabilizing-solution"``,
    ``"convergence-condition"``, ``"terminal-compatibility"``.
    """

    def __init__(self, assumption, message):
        self.assumption = assumption
        super().__init__(f"[{assumption}] {message}")


class SingularBracketError(AssumptionViolation):
    """A closed-form bracket I + W(tau)(S - P+) is singular at some tau."""

    def __init__(self, tau, message=""):
        self.tau = tau
        detail = message or f"bracket singular at tau={tau:.6g}"
        super().__init__("convergence-condition", detail)
