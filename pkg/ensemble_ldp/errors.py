"""Exception and warning classes shared by the workbench modules."""


class EnsembleLdpError(Exception):
    """Base class for every error raised by the workbench."""


class ConfigError(EnsembleLdpError, ValueError):
    """Invalid or unknown configuration value."""


class DimensionMismatchError(EnsembleLdpError, ValueError):
    """A measure, table or configuration does not match the grid it is used with."""


class HypothesisViolation(EnsembleLdpError):
    """A structural hypothesis needed by an experiment does not hold."""

    def __init__(self, check: str, message: str):
        super().__init__(f"{check}: {message}")
        self.check = check


class SingularGramError(EnsembleLdpError):
    """The weighted Gram matrix lost rank while building an orthonormal basis."""

    def __init__(self, degree: int, message: str | None = None):
        super().__init__(message or f"weighted Gram matrix numerically singular at degree {degree}")
        self.degree = degree


class QuadratureCostError(EnsembleLdpError, ValueError):
    """Requested tensor quadrature exceeds the supported size."""


class InsufficientDataError(EnsembleLdpError):
    """Too few usable points for a fit or estimate."""


class BracketError(EnsembleLdpError):
    """A root could not be bracketed, or the monotonicity it relies on fails."""


class RareEventWarning(UserWarning):
    """No chain sample hit the queried window."""


class NegativeRateWarning(UserWarning):
    """Rate function below the clamping band; the solver is likely unconverged."""


class DesingularizedEvaluationWarning(UserWarning):
    """A potential was evaluated on a weighted node; the self term was desingularized."""


class UnequilibratedChainWarning(UserWarning):
    """A chain used for estimation did not pass its equilibration checks."""


class InvalidMeasureError(EnsembleLdpError, ValueError):
    """Weights are negative or do not sum to one."""


class OwnershipError(EnsembleLdpError, RuntimeError):
    """An output path is already owned by another writer."""


class UnconvergedEquilibriumError(EnsembleLdpError):
    """The equilibrium solve stopped with a KKT residual above the accepted maximum."""
