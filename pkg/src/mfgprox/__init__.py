"""Proximal splitting solvers for stationary mean field games on the 2-torus."""

from .couplings import (
    Coupling,
    CubicCoupling,
    LogCoupling,
    QuadraticCoupling,
    ZeroCoupling,
    make_coupling,
)
from .diagnostics import (
    ExperimentSpec,
    KktResiduals,
    dual_objective,
    duality_gap,
    exact_test1,
    fit_rate,
    kkt_residuals,
    l2_error,
    make_test_problem,
)
from .energies import (
    ProxSpec,
    bhat,
    in_conjugate_set,
    primal_objective,
    prox_gamma_F_scalar,
    prox_phi,
    prox_phi_field,
    prox_psi_admm,
    q_eval,
)
from .grid_ops import (
    TorusGrid,
    apply_A,
    apply_B,
    apply_Bstar,
    dh_stencil,
    flux_from_value,
    hat_dh,
    laplacian,
    load_gf1,
    project_K,
    project_mass,
    save_gf1,
    transport,
)
from .problem import ProblemSpec
from .saddle_linear import (
    SaddleSolver,
    apply_G,
    apply_Gstar,
    estimate_norm,
    project_V,
    prox_psistar_unsplit,
)
from .splitting_solvers import (
    ALGORITHMS,
    PrimalDualState,
    SolveReport,
    SolverConfig,
    recover_multipliers,
    solve,
    stopping_check,
)

__version__ = "0.1.0"
