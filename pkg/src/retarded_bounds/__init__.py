"""Explicit bounds for retarded nonlinear integral inequalities, with an equality-case oracle."""

from .bounds import (
    BoundCurve,
    HorizonError,
    TauSearch,
    TransformTables,
    bound_curve,
    bound_thm1,
    bound_thm2,
    build_tables,
    compute_tau,
    horizon,
    p_eval,
    psi_argument,
    remark_tau,
)
from .corollaries import (
    CorollaryDomainError,
    PowerCaseParams,
    log_case_bound,
    log_case_G_inverse,
    sun_thm21_bound,
    sun_thm22_bound,
)
from .expr import EvalDomainError, ParseError, evaluate, parse
from .numerics import Grid, integrate, invert_monotone, uniform_grid
from .oracle import (
    FAMILIES,
    DominanceReport,
    EqualitySolution,
    check_dominance,
    generate_random_instance,
    solve_equality,
)
from .presets import PRESET_NAMES, get_preset
from .problem import InstanceError, ProblemInstance, Theorem, ValidationReport, validate

__version__ = "0.1.0"
