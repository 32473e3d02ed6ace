"""Exception hierarchy shared by the simulator modules."""


class HyperGHZError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(HyperGHZError, ValueError):
    """Invalid construction arguments (duplicate qubits, bad parameters, bad config)."""


class AddressError(HyperGHZError, KeyError):
    """A qubit address is missing from, or already present in, a register."""

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class NumericError(HyperGHZError, ArithmeticError):
    """A matrix that should be unitary is not."""


class ImpossibleOutcome(HyperGHZError):
    """A projection or post-selection has (numerically) zero probability."""

    def __init__(self, message: str, probability: float = 0.0):
        super().__init__(message)
        self.probability = probability


class ContractViolation(HyperGHZError, ValueError):
    """An operation was called outside the domain it is defined on."""


class InsufficientData(HyperGHZError, ValueError):
    """An estimator received no events."""


class FitError(HyperGHZError, RuntimeError):
    """Sinusoid fit did not converge."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CalibrationError(HyperGHZError, RuntimeError):
    """Noise calibration could not reach its targets."""

    def __init__(self, message: str, best_params=None, residuals=None):
        super().__init__(message)
        self.best_params = best_params
        self.residuals = residuals
