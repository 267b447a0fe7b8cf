"""Exception and warning types raised across the toolkit."""


class ThzIslError(Exception):
    """Base class for every error raised by this package."""


class TaylorOutOfRange(ThzIslError, ValueError):
    """Small-argument squint expansion requested outside its validity region."""


class NonPositivePsd(ThzIslError, ValueError):
    """A noise PSD bin is zero or negative."""


class ConventionMismatch(ThzIslError, ValueError):
    """A PSD built for one convention was passed where the other is required."""


class ZeroDistortion(ThzIslError, ValueError):
    """Saturation ceiling requested with zero distortion (ceiling is infinite)."""


class SingularFim(ThzIslError, ArithmeticError):
    """Fisher information matrix could not be inverted."""


class CovarianceNotPD(ThzIslError, ArithmeticError):
    """Toeplitz noise covariance failed Cholesky factorization."""


class AlphaOutOfRange(ThzIslError, ValueError):
    """Pilot overhead outside (0, 1]."""


class DegenerateFit(ThzIslError, ValueError):
    """Least-squares fit has no spread in the regressor."""


class ConfigError(ThzIslError, ValueError):
    """Configuration schema violation. ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ExperimentFailed(ThzIslError, RuntimeError):
    """An experiment ran but one of its validation verdicts failed."""


class MissingColumn(ThzIslError, KeyError):
    """A CSV lacks a column required by a plot description."""


class CrossoverOutsideUnit(UserWarning):
    """PN/DSE crossover overhead lies above 1."""


class ModelValidityWarning(UserWarning):
    """An input sits outside the regime where a closed-form model is trustworthy."""
