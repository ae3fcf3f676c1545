"""IMEX Runge-Kutta solvers for 1D hyperbolic systems with stiff relaxation,
penalized flux splittings, and semi-implicit solvers for their degenerate
parabolic diffusion limits."""

from .harness import (
    ConvergenceReport,
    ExperimentConfig,
    apply_overrides,
    convergence_study,
    detect_instability,
    error_norms,
    preset,
    preset_names,
    run_experiment,
)
from .imex import (
    DtPolicy,
    NewtonResult,
    SolverConfig,
    imex_step,
    integrate,
    solve_relaxation_newton,
    stable_dt,
)
from .limit_solver import (
    SemiImplicitScheme,
    midpoint_step,
    semi_implicit_step,
    solve_limit,
)
from .models import (
    EulerParams,
    MuRule,
    RelaxParams,
    SplitRHS,
    SplittingKind,
    eddington_chi,
    equilibrium_closure,
    euler_friction_split,
    euler_m1_split,
    kl_split,
    limit_problem,
    linear_relaxation_split,
    mu_exp,
    mu_step,
)
from .spatial import Boundary, Field, Grid1D, restrict
from .tableau import (
    ButcherTableau,
    ImexPair,
    SchemeKind,
    attained_order,
    builtin,
    check_order,
    classify,
    is_globally_stiffly_accurate,
    parse_tableau_file,
    serialize,
)

__version__ = "0.1.0"

__all__ = [
    "Boundary",
    "ButcherTableau",
    "ConvergenceReport",
    "DtPolicy",
    "EulerParams",
    "ExperimentConfig",
    "Field",
    "Grid1D",
    "ImexPair",
    "MuRule",
    "NewtonResult",
    "RelaxParams",
    "SchemeKind",
    "SemiImplicitScheme",
    "SolverConfig",
    "SplitRHS",
    "SplittingKind",
    "apply_overrides",
    "attained_order",
    "builtin",
    "check_order",
    "classify",
    "convergence_study",
    "detect_instability",
    "eddington_chi",
    "equilibrium_closure",
    "error_norms",
    "euler_friction_split",
    "euler_m1_split",
    "imex_step",
    "integrate",
    "is_globally_stiffly_accurate",
    "kl_split",
    "limit_problem",
    "linear_relaxation_split",
    "midpoint_step",
    "mu_exp",
    "mu_step",
    "parse_tableau_file",
    "preset",
    "preset_names",
    "restrict",
    "run_experiment",
    "semi_implicit_step",
    "serialize",
    "solve_limit",
    "solve_relaxation_newton",
    "stable_dt",
    "__version__",
]
