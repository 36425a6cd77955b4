"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """Rates, truncation sizes, or options outside their documented domain."""


class InvalidStateError(ValueError):
    """A background vector that is not a member of the difference space."""


class InvalidFaceError(ValueError):
    """A face label with an empty index set."""


class InvalidWindowError(ValueError):
    """A decay-estimation window violating the guard bands or too short."""


class SizeCapError(RuntimeError):
    """Requested truncation would enumerate more states than the configured cap."""


class ConvergenceFailureError(RuntimeError):
    """An iterative solve hit its iteration cap.

    Carries the last observed residual in ``residual``.
    """

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class InternalConsistencyError(RuntimeError):
    """An identity that must hold by construction failed; signals a bug upstream."""


class NumericalDegeneracyError(RuntimeError):
    """A quantity required to be positive came out nonpositive."""


class CertificationFailureError(RuntimeError):
    """No admissible drift certificate found in the searched region."""


class UnstableParamsError(ValueError):
    """Operation requires a stable parameter set (traffic intensity < 1)."""
