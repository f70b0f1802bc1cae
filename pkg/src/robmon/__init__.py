"""Robust multivariate location/scatter estimation and monitoring."""
from .rho import (
    RhoFamily,
    RhoSpec,
    breakdown_value,
    consistency_constant,
    monte_carlo_constant,
    psi_eval,
    rho_eval,
    tune_bisquare_for_bdp,
    weight_eval,
)
from .estimation import (
    DataMatrix,
    EstimationError,
    FitResult,
    SubsetPool,
    bdp_to_h,
    cstep,
    deterministic_starts,
    generate_elemental_subsets,
    mcd_estimate,
    mm_estimate,
    s_estimate,
    statistical_distances,
)

__version__ = "0.1.0"
