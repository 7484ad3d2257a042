"""Identifiability analysis and parameter recovery for parametrized ODEs."""

from ._core import (
    BranchSet,
    ConsistencyError,
    DefectiveMatrix,
    DegeneracyReport,
    DimensionError,
    DomainError,
    Error,
    EstimationResult,
    ExpDifferenceDeterminant,
    FullRankCheck,
    InjectivityCertificate,
    IntegrationError,
    LowerBoundReport,
    NotIdentifiable,
    ObservationMap,
    ParamSystem,
    PreconditionError,
    ZetaScan,
    __version__,
    add_noise,
    certify_radius,
    degeneracy_report,
    exp_difference_determinant,
    fd_linear_estimate,
    full_rank_check,
    gauss_newton_invert,
    integrate,
    log_branches,
    phi,
    phi_exact,
    phi_exact_jacobian,
    phi_jacobian,
    verify_lower_bound,
    zeta_scan,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
