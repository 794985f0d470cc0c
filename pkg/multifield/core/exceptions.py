class AppException(Exception):
    """Base exception for all toolkit errors."""
    def __init__(self, message: str, code: str = "APP_ERROR", exit_code: int = 2):
        self.message = message
        self.code = code
        self.exit_code = exit_code
        super().__init__(self.message)

# ------------------------------
# VALIDATION ERRORS (exit code 1)
# ------------------------------

class ValidationError(AppException):
    """Exception for data validation failures"""
    def __init__(self, field: str = None, message: str = "Validation failed", code: str = "VALIDATION_ERROR"):
        error_message = message
        if field:
            error_message = f"Validation failed for {field}: {message}"

        super().__init__(
            message=error_message,
            code=code,
            exit_code=1
        )

class InputError(ValidationError):
    """Raised when operation inputs violate their preconditions."""
    def __init__(self, message: str, field: str = None):
        super().__init__(field=field, message=message, code="INPUT_ERROR")

class ScenarioSchemaError(ValidationError):
    """Raised when a scenario file does not parse or does not match the schema."""
    def __init__(self, message: str, location: str = None):
        super().__init__(field=location, message=message, code="SCENARIO_SCHEMA_ERROR")

class SelectorError(ValidationError):
    """Raised when a report does not contain the requested series."""
    def __init__(self, selector: str, available: list = None):
        available = sorted(available or [])
        super().__init__(
            field="series",
            message=f"unknown series '{selector}'; available: {', '.join(available) or 'none'}",
            code="SELECTOR_ERROR"
        )
        self.available = available

class UnknownCaseError(ValidationError):
    """Raised when a registry lookup uses an unknown tag."""
    def __init__(self, kind: str, tag: str, known: list = None):
        message = f"unknown {kind} '{tag}'"
        if known:
            message += f"; known: {', '.join(sorted(known))}"
        super().__init__(message=message, code="UNKNOWN_CASE")

class PreconditionViolation(ValidationError):
    """Raised (or flagged) when a documented operation precondition does not hold."""
    def __init__(self, message: str):
        super().__init__(message=message, code="PRECONDITION_VIOLATION")

# ------------------------------
# NUMERICAL / MODEL ERRORS (exit code 2)
# ------------------------------

class NumericalError(AppException):
    """Base exception for numerical failures"""
    def __init__(self, message: str, code: str = "NUMERICAL_ERROR"):
        super().__init__(message=message, code=code, exit_code=2)

class MetricDegenerateError(NumericalError):
    """Raised when a chart metric is singular or not positive-definite."""
    def __init__(self, message: str):
        super().__init__(message, code="METRIC_DEGENERATE")

class ChartSingularityError(NumericalError):
    """Raised when a point lies on (or too close to) a singular chart locus."""
    def __init__(self, message: str):
        super().__init__(message, code="CHART_SINGULARITY")

class DistanceUnavailableError(NumericalError):
    """Raised when no analytic distance exists and geodesic shooting fails."""
    def __init__(self, message: str):
        super().__init__(message, code="DISTANCE_UNAVAILABLE")

class UnsupportedActionError(NumericalError):
    """Raised when a group action is not registered on a manifold."""
    def __init__(self, group: str, manifold: str):
        super().__init__(f"group '{group}' has no registered action on {manifold}", code="UNSUPPORTED_ACTION")
        self.group = group

class OrientationError(NumericalError):
    """Raised when det F <= 0 at some node."""
    def __init__(self, node: tuple, det: float):
        super().__init__(f"det F = {det:.6g} <= 0 at node {node}", code="ORIENTATION_ERROR")
        self.node = node
        self.det = det

class NumericalConsistencyError(NumericalError):
    """Raised when an output violates a structural identity beyond tolerance."""
    def __init__(self, message: str):
        super().__init__(message, code="NUMERICAL_CONSISTENCY")

class ModelError(NumericalError):
    """Raised when a model closure fails or returns inadmissible values."""
    def __init__(self, message: str):
        super().__init__(message, code="MODEL_ERROR")

class TraceDivergenceError(NumericalError):
    """Raised when one-sided limits do not extrapolate to a stable value."""
    def __init__(self, message: str):
        super().__init__(message, code="TRACE_DIVERGENCE")

class GeometryError(NumericalError):
    """Raised for degenerate surface geometry (vanishing level-set gradient, off-surface points)."""
    def __init__(self, message: str):
        super().__init__(message, code="GEOMETRY_ERROR")

class StagnationError(NumericalError):
    """Raised when backtracking cannot produce an energy decrease."""
    def __init__(self, message: str, diagnostics: dict = None):
        super().__init__(message, code="STAGNATION")
        self.diagnostics = diagnostics or {}

class InstabilityError(NumericalError):
    """Raised when the integrator energy blows up."""
    def __init__(self, message: str, step: int = None):
        super().__init__(message, code="INSTABILITY")
        self.step = step

class TaskError(AppException):
    """Wraps a downstream error with scenario task context."""
    def __init__(self, task: str, error: AppException):
        super().__init__(
            message=f"task '{task}' failed: {error.message}",
            code=error.code,
            exit_code=error.exit_code
        )
        self.task = task
        self.error = error
