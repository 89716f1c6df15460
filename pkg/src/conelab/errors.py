"""Exception and warning types raised across conelab."""


class ConeLabError(Exception):
    """Base class for all conelab errors."""


class EmptyBand(ConeLabError):
    pass


class InvalidPlateau(ConeLabError):
    pass


class KindMismatch(ConeLabError):
    pass


class BudgetExceeded(ConeLabError):
    pass


class SingularNode(ConeLabError):
    pass


class ConfigError(ConeLabError):
    pass


class UnknownRun(ConeLabError):
    pass


class UnknownExperiment(ConeLabError):
    pass


class QuadratureUnderresolved(UserWarning):
    """Two successive refinements of a t-rule disagree beyond its tolerance."""
