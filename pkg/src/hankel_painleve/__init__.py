"""Arbitrary-precision verification of the Painleve structure of Hankel determinants
for the Jacobi weight with a jump and an algebraic singularity at an interior point.
"""

__version__ = "0.1.0"

from .errors import InsufficientPrecisionError, QuadratureConvergenceError
from .weight_moments import MomentTable, PrecisionContext, WeightParams, moment, moment_crosscheck, moment_table
from .orthopoly import RecurrenceTable, hankel_det_direct, recurrence_table
from .pipeline import Cell, build_cell

__all__ = [
    "__version__",
    "InsufficientPrecisionError",
    "QuadratureConvergenceError",
    "MomentTable",
    "PrecisionContext",
    "WeightParams",
    "moment",
    "moment_crosscheck",
    "moment_table",
    "RecurrenceTable",
    "hankel_det_direct",
    "recurrence_table",
    "Cell",
    "build_cell",
]
