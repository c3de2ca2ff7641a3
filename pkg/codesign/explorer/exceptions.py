"""
Exceptions for the co-design explorer.
"""


class CodesignError(Exception):
    """Base exception for the explorer."""
    pass


class ConfigError(CodesignError):
    """Error related to configuration issues (tables, run config, unknown ids)."""
    pass


class DomainError(CodesignError):
    """An argument lies outside the domain of an operation (zero dims, bw <= 0)."""
    pass


class ModelError(CodesignError):
    """A DNN model is malformed or collapses (e.g. feature map shrinks to zero)."""
    pass


class InfeasibleError(ModelError):
    """No hardware configuration fits the resource budget."""

    def __init__(self, message: str, binding_resource: str = None):
        super().__init__(message)
        self.binding_resource = binding_resource


class RejectedMoveError(ModelError):
    """A coordinate move would break model invariants."""
    pass


class CalibrationError(CodesignError):
    """Calibration samples cannot determine the fitted parameters."""
    pass


class EvaluatorError(CodesignError):
    """The accuracy evaluator failed to produce a score."""
    pass


class PlanningError(CodesignError):
    """A code generation plan violates the device's on-chip memory budget."""

    def __init__(self, message: str, buffer_name: str = None):
        super().__init__(message)
        self.buffer_name = buffer_name


class SimulationError(CodesignError):
    """A simulated schedule broke a causality invariant."""
    pass
