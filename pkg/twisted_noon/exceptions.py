class NoonError(Exception):
    """
    Base class for everything this package raises on purpose.
    """

    pass


class DomainError(NoonError, ValueError):
    """Physically or mathematically invalid input (l = 0, N = 0, N mismatch, ...)"""

    pass


class NonUnitaryError(DomainError):
    """Mode transform fails the U^dagger U = I check"""

    pass


class ResolutionError(DomainError):
    """Sampling grid cannot resolve the requested azimuthal structure"""

    def __init__(self, ell, required_px, actual_px):
        self.ell = ell
        self.required_px = required_px
        self.actual_px = actual_px
        message = (
            f"grid of {actual_px} px cannot resolve l={ell}: "
            f"at least {required_px} px are required"
        )
        super(ResolutionError, self).__init__(message)


class InsufficientDataError(DomainError):
    """Too few angles, repetitions or overlapping points for the requested analysis"""

    pass


class ConfigError(NoonError):
    """Invalid run configuration. `field` names the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super(ConfigError, self).__init__(f"{field}: {message}")


class NumericalError(NoonError):
    """Generic numerical failure"""

    pass


class FitConvergenceError(NumericalError):
    """No restart of a least-squares fit converged"""

    def __init__(self, message, best_residual=None):
        self.best_residual = best_residual
        if best_residual is not None:
            message = f"{message} (best residual {best_residual:.6g})"
        super(FitConvergenceError, self).__init__(message)


class PeriodAliasError(NumericalError):
    """Fringe period in the data disagrees with the 180 deg / (N l) prior"""

    def __init__(self, expected_period, estimated_period):
        self.expected_period = expected_period
        self.estimated_period = estimated_period
        super(PeriodAliasError, self).__init__(
            f"data period {estimated_period:.6g} deg deviates from the expected "
            f"{expected_period:.6g} deg by more than 30%"
        )


class HologramExportError(NoonError, OSError):
    """Writing a hologram image failed"""

    def __init__(self, path, reason):
        self.path = path
        super(HologramExportError, self).__init__(f"cannot write {path}: {reason}")


def detect_and_raise_error(result, what="fit"):
    """
    Raise the matching error for a failed scipy.optimize.least_squares result.

    :param result: result returned by the optimizer
    :type result: scipy.optimize.OptimizeResult

    :param what: name used in the error message
    :type what: str
    """
    residual = float(2.0 * result.cost) if hasattr(result, "cost") else None
    if result.status == -1:
        raise FitConvergenceError(f"{what}: improper input to the optimizer", residual)
    elif result.status == 0:
        raise FitConvergenceError(
            f"{what}: evaluation budget exhausted before convergence", residual
        )
    elif not result.success:
        raise FitConvergenceError(f"{what}: {result.message}", residual)


def exit_code(exc):
    """
    CLI exit code for an exception: 2 for configuration and domain errors,
    3 for numerical failures and anything unexpected.
    """
    if isinstance(exc, (ConfigError, DomainError)):
        return 2
    return 3
