"""
Custom exceptions for the MRTS spin-dynamics simulator.
Provides structured error handling with proper inheritance hierarchy.
"""

import re
from typing import Optional, Sequence


class MRTSError(Exception):
    """Base exception for all simulator errors."""

    def __init__(self, message: str, error_code: str = None, details: dict = None):
        self.message = message
        self.error_code = error_code or self.__class__.__name__
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self) -> dict:
        """Convert exception to dictionary format."""
        return {
            "success": False,
            "error": self.message,
            "error_code": self.error_code,
            "details": self.details
        }


# === SPIN ALGEBRA EXCEPTIONS ===

class SpinAlgebraError(MRTSError):
    """Base exception for spin-operator and basis errors."""
    pass


class InvalidSpinError(SpinAlgebraError):
    """Raised when a spin quantum number is negative or not a half-integer."""

    def __init__(self, spin: float, reason: str):
        super().__init__(f"Invalid spin {spin}: {reason}", details={"spin": spin})


class BasisError(SpinAlgebraError):
    """Raised when the composite basis is used inconsistently."""
    pass


class UnknownManifoldError(BasisError):
    """Raised when a manifold label is not one of S0, S1, T1."""

    def __init__(self, manifold: str):
        super().__init__(f"Unknown manifold: {manifold}", details={"manifold": manifold})


class SlotManifoldError(BasisError):
    """Raised when an operator slot is requested in a manifold that lacks it."""

    def __init__(self, slot: str, manifold: str):
        super().__init__(
            f"Slot '{slot}' is not available in manifold {manifold}",
            details={"slot": slot, "manifold": manifold}
        )


class UnknownStateLabelError(BasisError):
    """Raised when a state label does not resolve to a basis vector."""

    def __init__(self, label: str, reason: str = "no matching state"):
        super().__init__(f"Unknown state label '{label}': {reason}", details={"label": label})


class DimensionMismatchError(SpinAlgebraError):
    """Raised when an operator or vector has the wrong dimension."""

    def __init__(self, actual: Sequence[int], expected: Sequence[int]):
        message = f"Dimension mismatch: got {tuple(actual)}, expected {tuple(expected)}"
        super().__init__(message, details={
            "actual": list(actual),
            "expected": list(expected)
        })


# === PARAMETER EXCEPTIONS ===

class ParameterError(MRTSError):
    """Base exception for physical-parameter errors."""
    pass


class InvalidParameterError(ParameterError):
    """Raised when a physical parameter violates its invariants."""

    def __init__(self, name: str, value, reason: str):
        super().__init__(
            f"Invalid parameter {name}={value}: {reason}",
            details={"name": name, "value": str(value)}
        )


class UnitError(ParameterError):
    """Raised when a unit tag is unknown or a quantity cannot be parsed."""
    pass


class UnitMismatchError(ParameterError):
    """Raised when quantities that must share a unit do not."""

    def __init__(self, units: Sequence[str]):
        super().__init__(
            f"Unit mismatch: {', '.join(units)}",
            details={"units": list(units)}
        )


# === NUMERICAL EXCEPTIONS ===

class NumericalError(MRTSError):
    """Base exception for numerical failures in propagation or solves."""
    pass


class TraceDriftError(NumericalError):
    """Raised when a propagated state's trace drifts beyond tolerance."""

    def __init__(self, time: float, trace: complex, tolerance: float):
        message = f"Trace drift at t={time:.6g} ns: trace={trace:.12g}, tolerance {tolerance:g}"
        super().__init__(message, details={
            "time": time,
            "trace_real": float(complex(trace).real),
            "trace_imag": float(complex(trace).imag),
            "tolerance": tolerance
        })


class HermiticityError(NumericalError):
    """Raised when a propagated state is not Hermitian within tolerance."""

    def __init__(self, time: float, residual: float, tolerance: float):
        message = f"Hermiticity residual {residual:.3g} at t={time:.6g} ns exceeds {tolerance:g}"
        super().__init__(message, details={
            "time": time,
            "residual": residual,
            "tolerance": tolerance
        })


class PositivityError(NumericalError):
    """Raised when a propagated state has a negative eigenvalue beyond tolerance."""

    def __init__(self, time: float, min_eigenvalue: float, tolerance: float):
        message = (
            f"Negative eigenvalue {min_eigenvalue:.3g} at t={time:.6g} ns "
            f"(tolerance -{tolerance:g})"
        )
        super().__init__(message, details={
            "time": time,
            "min_eigenvalue": min_eigenvalue,
            "tolerance": tolerance
        })


class SingularSystemError(NumericalError):
    """Raised when the shifted Liouvillian is singular or ill-conditioned."""

    def __init__(self, omega: float, condition: float):
        message = f"Resolvent system singular at omega={omega:.6g} rad/ns (condition ~{condition:.3g})"
        super().__init__(message, details={"omega": omega, "condition": condition})


class OrientationFailureError(NumericalError):
    """Raised when a powder-average orientation evaluation fails."""

    def __init__(self, index: int, theta: float, phi: float, cause: str):
        message = (
            f"Orientation #{index} (theta={theta:.6g}, phi={phi:.6g}) failed: {cause}"
        )
        super().__init__(message, details={
            "index": index,
            "theta": theta,
            "phi": phi,
            "cause": cause
        })


# === EXCHANGE EXCEPTIONS ===

class ExchangeError(MRTSError):
    """Base exception for exchange-coupling extraction errors."""
    pass


class MissingEnergyLabelError(ExchangeError):
    """Raised when an energy table lacks a label needed for extraction."""

    def __init__(self, label: str, source: Optional[str] = None):
        message = f"Missing energy label: {label}"
        if source:
            message += f" (in {source})"
        super().__init__(message, details={"label": label, "source": source})


class DuplicateAngleError(ExchangeError):
    """Raised when a dihedral scan contains the same angle twice."""

    def __init__(self, angle: float):
        super().__init__(f"Duplicate dihedral angle: {angle:g} deg", details={"angle": angle})


class EnergyTableParseError(ExchangeError):
    """Raised when an energy-table file has a malformed line."""

    def __init__(self, source: str, line_number: int, line: str, reason: str):
        message = f"{source}:{line_number}: {reason}: {line.strip()!r}"
        super().__init__(message, details={
            "source": source,
            "line_number": line_number,
            "reason": reason
        })


# === CONFIGURATION EXCEPTIONS ===

class ConfigurationError(MRTSError):
    """Base exception for configuration errors."""
    pass


class ConfigFileNotFoundError(ConfigurationError):
    """Raised when a config or input file does not exist."""

    def __init__(self, path: str):
        super().__init__(f"File not found: {path}", details={"path": path})


class ConfigSchemaError(ConfigurationError):
    """Raised when a run config fails schema validation."""

    def __init__(self, problems: Sequence[str]):
        message = "Invalid configuration: " + "; ".join(problems)
        super().__init__(message, details={"problems": list(problems)})


# === UTILITY FUNCTIONS ===

NON_FINITE_PATTERN = re.compile(r"\b(nans?|infs?|infinity)\b")


def handle_numerical_exception(e: Exception) -> dict:
    """Convert propagation/solver exceptions to standardized error response."""
    if isinstance(e, MRTSError):
        return e.to_dict()

    error_msg = str(e).lower()
    if "singular" in error_msg:
        return NumericalError(f"Singular matrix: {e}", error_code="SingularSystemError").to_dict()
    elif NON_FINITE_PATTERN.search(error_msg):
        return NumericalError(f"Non-finite values encountered: {e}").to_dict()
    else:
        return NumericalError(f"Numerical error: {e}").to_dict()


def handle_config_exception(e: Exception) -> dict:
    """Convert configuration exceptions to standardized error response."""
    if isinstance(e, MRTSError):
        return e.to_dict()

    if isinstance(e, FileNotFoundError):
        return ConfigFileNotFoundError(str(e.filename or e)).to_dict()
    return ConfigurationError(f"Configuration error: {e}").to_dict()


def handle_exchange_exception(e: Exception) -> dict:
    """Convert exchange-extraction exceptions to standardized error response."""
    if isinstance(e, MRTSError):
        return e.to_dict()

    return ExchangeError(f"Exchange extraction error: {e}").to_dict()
