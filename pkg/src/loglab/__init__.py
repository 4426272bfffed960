"""Numerical laboratory for the obstacle problem with logarithmic forcing.

Subpackages by task: :mod:`geometry` (grids and quadrature), :mod:`spherical`
(traces on the unit sphere), :mod:`energy` (Weiss-type energies),
:mod:`solver` (constrained minimization), :mod:`epiperimetric`
(competitors lowering the excess), :mod:`blowup` (classification of
free-boundary points) and :mod:`decay` (rate fits).
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DomainError,
    InsufficientDataError,
    LoglabError,
    NumericalError,
    PreconditionError,
    RejectionError,
)
from .geometry import QuadratureRule, ScalarField, read_fld1, write_fld1
from .spherical import HalfSpaceSolution, QuadraticForm, SphereTrace

__all__ = [
    "__version__",
    "ConfigurationError",
    "DomainError",
    "InsufficientDataError",
    "LoglabError",
    "NumericalError",
    "PreconditionError",
    "RejectionError",
    "QuadratureRule",
    "ScalarField",
    "read_fld1",
    "write_fld1",
    "HalfSpaceSolution",
    "QuadraticForm",
    "SphereTrace",
]
