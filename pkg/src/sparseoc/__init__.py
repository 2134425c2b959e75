"""Sparse optimal control of elliptic equations with L^{1/p} penalties."""

from .dca import (
    KKTResiduals,
    SolveReport,
    dca_solve,
    kkt_residuals,
    null_beta_threshold,
    sparsity_count,
    stationarity_residual,
)
from .estimators import SparseControlDCA, SparseControlPD
from .grid import (
    EllipticOperator,
    EllipticOperatorSpec,
    Grid,
    SolverError,
    build_grid,
    inner,
    integrate,
    norm_l1,
    norm_l2_sq,
)
from .harness import RunConfig, build_example, run
from .l1 import lipschitz_estimate, soft_threshold, solve_l1
from .pd import PDParams, match_regularization, pd_solve, regularization_error
from .penalty import (
    PenaltyParams,
    cost_J,
    cost_Jgamma,
    huber,
    j_prime,
    j_value,
    upsilon_p,
    upsilon_pg,
)
from .problem import BoxConstraints, ControlProblem, project_box

__all__ = [
    "KKTResiduals",
    "SolveReport",
    "dca_solve",
    "kkt_residuals",
    "null_beta_threshold",
    "sparsity_count",
    "stationarity_residual",
    "EllipticOperator",
    "EllipticOperatorSpec",
    "Grid",
    "SolverError",
    "build_grid",
    "inner",
    "integrate",
    "norm_l1",
    "norm_l2_sq",
    "PenaltyParams",
    "cost_J",
    "cost_Jgamma",
    "huber",
    "j_prime",
    "j_value",
    "upsilon_p",
    "upsilon_pg",
    "SparseControlDCA",
    "SparseControlPD",
    "RunConfig",
    "build_example",
    "run",
    "lipschitz_estimate",
    "soft_threshold",
    "solve_l1",
    "PDParams",
    "match_regularization",
    "pd_solve",
    "regularization_error",
    "BoxConstraints",
    "ControlProblem",
    "project_box",
]

__version__ = "0.1.0"
