"""Bilinear cone multipliers, their decompositions and square/maximal functionals on a periodic lattice."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BudgetExceeded,
    ConeLabError,
    ConfigError,
    EmptyBand,
    InvalidPlateau,
    KindMismatch,
    QuadratureUnderresolved,
    SingularNode,
    UnknownExperiment,
    UnknownRun,
)
from .lattice import Band, GridSpec, SpatialField, Spectrum  # noqa: F401
from .symbols import SymbolDescriptor, SymbolKind  # noqa: F401
