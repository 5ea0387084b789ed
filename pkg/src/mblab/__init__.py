"""Numerical construction of multi-transition solutions of periodic Allen-Cahn equations."""

from .errors import (ConfigurationError, ConvergenceError, InfeasibleError, Interrupted,
                     MBLabError, NumericalError, RangeError, ShapeError)
from .grid import Field, GridSpec, refine, tile_l2_distance, tile_restrict, translate
from .potential import Potential, eval_F, eval_Fu, make_potential

__version__ = "0.1.0"
