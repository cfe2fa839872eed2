"""
Exceptions raised by the geometry modules.
"""
from typing import Any, Dict, Optional


class DomainError(ValueError):
    """A point or radius lies outside the chart an operation is defined on."""


class MarginError(ValueError):
    """A finite-difference stencil or sampling window leaves the grid."""


class AdmissionError(ValueError):
    """A constructor rejected its input; ``invariant`` names the violated rule."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"[{invariant}] {message}")
        self.invariant = invariant


class InadmissibleDeformation(ValueError):
    """The deformed metric g_s is no longer Riemannian."""

    def __init__(self, s: float, message: str):
        super().__init__(f"s={s!r}: {message}")
        self.s = s


class PreconditionViolation(ValueError):
    """An operation was called on data that breaks its stated precondition."""


class _DiagnosticError(RuntimeError):
    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SolverFailure(_DiagnosticError):
    """The boundary-value solve failed (singular system, u <= 0, residual too large)."""


class FitFailure(_DiagnosticError):
    """A limit extrapolation or harmonic fit did not reach its residual tolerance."""
