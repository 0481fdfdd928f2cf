"""Optimal unambiguous discrimination of qudit states and its projective realization."""

from __future__ import annotations

__version__ = "0.1.0"

from .analytic import (
    AlphaVector,
    SurfaceCandidate,
    SurfaceSolutionSet,
    f3_cubic,
    idp_alpha,
    idp_optimal_2,
    in_convex_set,
    make_alpha,
    success_prob,
    surface_solutions_3,
)
from .ensemble import (
    DualBasis,
    GramData,
    LgTripleParams,
    StateEnsemble,
    dual_basis,
    gram_data,
    lg_triple,
    load_ensemble,
    orthonormal_ensemble,
    pattern_ensemble,
    random_ensemble,
)
from .errors import ClosedFormUnavailableError, ConvergenceError, InfeasibleError, NotDiscriminableError
from .mesd import MesdResult, helstrom_2, mesd_bound
from .naimark import (
    Extension3Coefficients,
    ExtensionCoefficients,
    ProjectiveMeasurement,
    extend_2,
    extend_3_closed_form,
    extend_general,
    lg_closed_form_vectors,
    min_extension_dim,
    realize_povm,
    synthesize,
)
from .photonsim import (
    CountTable,
    OutcomeDistribution,
    SweepPoint,
    crosstalk_visibility,
    empirical_stats,
    monte_carlo_sweep,
    mub4_bases,
    outcome_probs,
    simulate_counts,
)
from .solver import SolverReport, UsdPovm, build_povm, kkt_check, solve_optimal_alpha
