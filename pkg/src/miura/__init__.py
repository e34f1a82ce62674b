"""Nonnegative Schroedinger operators on the line, their Miura preimages, and mKdV/KdV evolution."""

from .fiber import E1, E2, E_DOT, E_GT, FiberReport, fiber, fiber_member, fiber_norm_identity, forward_miura
from .grid import Grid, GridFn
from .potential import Atom, Potential, special_integral
from .schrodinger import (
    CERTIFIED,
    NEGATIVE,
    UNDETERMINED,
    NumericalError,
    dirichlet_lambda0,
    greens_function,
    integrate,
    is_nonnegative,
    lambda0_line,
    positive_solution,
    wronskian,
)

__version__ = "0.1.0"

__all__ = [
    "Atom", "CERTIFIED", "E1", "E2", "E_DOT", "E_GT", "FiberReport", "Grid", "GridFn", "NEGATIVE",
    "NumericalError", "Potential", "UNDETERMINED", "dirichlet_lambda0", "fiber", "fiber_member",
    "fiber_norm_identity", "forward_miura", "greens_function", "integrate", "is_nonnegative",
    "lambda0_line", "positive_solution", "special_integral", "wronskian",
]
