"""Exception types shared across the package."""


class MagtrapError(Exception):
    """Base class for all package errors."""


class FieldDomainError(MagtrapError):
    """Position outside the validity region of the truncated field expansion."""


class UnstableTrapError(MagtrapError):
    """The configured field/particle combination does not form a stable trap."""


class CalibrationError(MagtrapError):
    """Coefficient calibration or equilibrium search failed to converge."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class IntegrationError(MagtrapError):
    """The stochastic integrator produced a non-finite state or was misconfigured."""


class FitError(MagtrapError):
    """Nonlinear fit did not converge."""

    def __init__(self, message, residual_trace=None):
        super().__init__(message)
        self.residual_trace = residual_trace


class ConfigError(MagtrapError):
    """Invalid experiment configuration."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or [message]
