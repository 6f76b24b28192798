"""Mixed-integer linear programming engine."""

from .model import Constraint, MipModel, MipSolution, Status, Variable
from .simplex import LPResult, StandardLP, solve_lp
from .bnb import solve_mip
