"""Structured-grid solver and regularity auditor for p-structure systems.

The constitutive law is S(A) = (mu + |A|)**(p-2) * A acting on either the
full velocity gradient or its symmetric part.  The package solves the
associated nonlinear elliptic systems on small periodic-slab and Dirichlet
box grids, reconstructs wall-normal second derivatives from tangential data,
and estimates the discrete constants appearing in second-order a priori
bounds.
"""

from .audit import (
    AuditReport,
    admissible_p,
    estimate_c4,
    estimate_c5,
    growth_fit,
    holder_seminorm,
    r_of_q,
    run_audit,
    tangential_energy_check,
    verify_estimate,
)
from .constitutive import (
    FULL_GRADIENT,
    SYMMETRIC_GRADIENT,
    ConstitutiveParams,
    inequality_ratios,
    stress,
    stress_jacobian,
    sym_part,
    tensor_norm,
    triple_product_check,
)
from .errors import (
    BadExponent,
    BadRange,
    CoefficientBlowup,
    ConfigError,
    DegenerateConfig,
    DegeneratePoint,
    EpsTooLarge,
    IllConditioned,
    NoConvergence,
    NotConverged,
    PStructError,
    PathStalled,
    TooCoarse,
    UnknownId,
)
from .grid import (
    CUBIC_PERIODIC,
    DIRICHLET_BOX,
    DomainSpec,
    SecondDerivField,
    apply_constraints,
    build_domain,
    divergence,
    gradient,
    laplacian,
    load_field,
    mollify,
    norm,
    save_field,
    second_derivatives,
)
from .poisson import poisson_solve
from .problems import (
    AnalyticField,
    ProblemSpec,
    RhsSpec,
    manufactured_continuous,
    manufactured_discrete,
    oned_profile_oracle,
    rhs_sample,
    smooth_test_field,
)
from .reconstruct import (
    NormalSystem,
    assemble_normal_system,
    pointwise_bound_check,
    reconstruct_dzz,
    solve_normal,
)
from .solver import (
    ContinuationPath,
    FrozenReport,
    SolveConfig,
    SolveReport,
    continuation_solve,
    energy,
    frozen_linear_solve,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticField",
    "AuditReport",
    "BadExponent",
    "BadRange",
    "CUBIC_PERIODIC",
    "CoefficientBlowup",
    "ConfigError",
    "ConstitutiveParams",
    "ContinuationPath",
    "DIRICHLET_BOX",
    "DegenerateConfig",
    "DegeneratePoint",
    "DomainSpec",
    "EpsTooLarge",
    "FrozenReport",
    "IllConditioned",
    "NoConvergence",
    "NormalSystem",
    "NotConverged",
    "PStructError",
    "PathStalled",
    "ProblemSpec",
    "RhsSpec",
    "SecondDerivField",
    "SolveConfig",
    "SolveReport",
    "TooCoarse",
    "UnknownId",
    "FULL_GRADIENT",
    "SYMMETRIC_GRADIENT",
    "admissible_p",
    "apply_constraints",
    "assemble_normal_system",
    "build_domain",
    "continuation_solve",
    "divergence",
    "energy",
    "estimate_c4",
    "estimate_c5",
    "frozen_linear_solve",
    "gradient",
    "growth_fit",
    "holder_seminorm",
    "inequality_ratios",
    "laplacian",
    "load_field",
    "manufactured_continuous",
    "manufactured_discrete",
    "mollify",
    "norm",
    "oned_profile_oracle",
    "pointwise_bound_check",
    "poisson_solve",
    "r_of_q",
    "reconstruct_dzz",
    "rhs_sample",
    "run_audit",
    "save_field",
    "second_derivatives",
    "smooth_test_field",
    "solve",
    "solve_normal",
    "stress",
    "stress_jacobian",
    "sym_part",
    "tangential_energy_check",
    "tensor_norm",
    "triple_product_check",
    "verify_estimate",
]
