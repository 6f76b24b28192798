"""Water-exchange network design for eco-industrial parks.

The designer picks fresh-water intakes and inter-enterprise fluxes that
minimise the park's total fresh water while every participating enterprise
is guaranteed a relative cost reduction and no enterprise can improve by
changing its own inputs.
"""

from .model import (
    DerivedConstants, Enterprise, EipInstance, InstanceError, ParkOperation, Prices,
    compute_discharge, contract_bound, derive_constants, enterprise_cost, park_costs,
    piecewise_discharge, validate_instance,
)
from .engine import MipModel, MipSolution, Status, solve_lp, solve_mip
from .reduction import (
    DEFAULT_EPSILON, MethodologyResult, ReducedProblem, build, extract_network,
    extract_operation, select_equilibrium, solve, solve_methodology,
)
from .equilibrium import (
    DeviationCertificate, EquilibriumAudit, PhysicalInfeasibility, Verdict, best_response,
    check_physical, lemma1_predicate, lemma2_predicate, verify_equilibrium,
)
from .analysis import (
    DesignReport, SweepResult, alpha_sweep, build_report, epsilon_sweep, make_grid,
)
from .io import load_instance, load_solution, save_solution

__version__ = "0.1.0"
