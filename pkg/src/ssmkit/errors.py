"""Exception hierarchy for the ssmkit engine."""


class SsmError(Exception):
    """Base class for all engine errors."""


class ModelSyntaxError(SsmError):
    """Raised by the model-file parser, with source position."""

    def __init__(self, message, line=None, column=None, token=None):
        self.line = line
        self.column = column
        self.token = token
        if line is not None:
            message = f"{line}:{column}: {message}"
        super().__init__(message)


class Diagnostic:
    """One validation violation, tied to a variable and block."""

    def __init__(self, message, var=None, block=None):
        self.message = message
        self.var = var
        self.block = block

    def __str__(self):
        return self.message

    def __repr__(self):
        return f"Diagnostic({self.message!r})"


class ModelValidationError(SsmError):
    """Raised when a parsed model fails semantic validation."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class DistributionParameterError(SsmError):
    """Invalid distribution parameter at evaluation time."""


class NonFiniteStateError(SsmError):
    """A state variable became NaN or infinite during simulation."""

    def __init__(self, message, time=None):
        self.time = time
        super().__init__(message)


class CholeskyError(SsmError):
    """Cholesky factorization or downdate failed (matrix not PSD)."""

    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class NonlinearModelError(SsmError):
    """Model is not linear-Gaussian; the Kalman filter does not apply."""


class DegenerateEnsembleError(SsmError):
    """All particle weights vanished at some time step."""

    def __init__(self, message, time=None):
        self.time = time
        super().__init__(message)


class MissingInputError(SsmError):
    """A required input value is not available at the requested time."""


class DataFormatError(SsmError):
    """Malformed or schema-inconsistent data file."""


class ConfigError(SsmError):
    """Command-line / configuration usage error (exit code 1)."""
