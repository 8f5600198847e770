"""Shared exception types."""


class ConfigError(ValueError):
    """A configuration value is outside its documented range."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge within its iteration budget."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class TrainingDiverged(RuntimeError):
    """The training loss became non-finite; carries last-batch diagnostics."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(f"{message}; last batch stats: {diagnostics}")
        self.diagnostics = diagnostics


class EvaluationError(RuntimeError):
    """Evaluation preconditions not met (e.g. no qualifying events)."""
