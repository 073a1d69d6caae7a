"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class GridMismatchError(ValueError):
    """Two objects were built on different grids."""


class InvariantError(ValueError):
    """A structural invariant (positivity, finiteness, matching) is violated."""


class ResolutionError(ValueError):
    """A requested scale is too small for the grid to resolve."""


class NotHomogeneousError(ValueError):
    """The operation needs a homogeneous model (no factor, constant potential)."""


class NotCoerciveError(RuntimeError):
    """The operator has a non-positive smallest eigenvalue.

    Parameters
    ----------
    message : str
        Human readable diagnostic.
    eigenvalue : float
        The smallest eigenvalue that triggered the refusal.
    """

    def __init__(self, message: str, eigenvalue: float):
        super().__init__(f"{message} (smallest eigenvalue {eigenvalue:.6g})")
        self.eigenvalue = float(eigenvalue)


class ConvergenceError(RuntimeError):
    """An iterative method exceeded its iteration cap.

    Parameters
    ----------
    message : str
        Human readable diagnostic.
    residual : float
        Last residual reached.
    iterations : int
        Iterations performed.
    detail : dict, optional
        Extra context, e.g. the failing continuation rung.
    """

    def __init__(self, message: str, residual: float, iterations: int,
                 detail: dict | None = None):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = float(residual)
        self.iterations = int(iterations)
        self.detail = dict(detail or {})


class ConfigError(ValueError):
    """An experiment configuration failed validation.

    Parameters
    ----------
    violations : list of str
        One entry per offending key, formatted ``"key: reason"``.
    """

    def __init__(self, violations: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(violations))
        self.violations = list(violations)


class SchemaMismatchError(ValueError):
    """Two reports do not share a schema or experiment kind."""
