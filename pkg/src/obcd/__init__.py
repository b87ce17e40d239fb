"""Two-row orthogonal updates for minimizing composite objectives over the Stiefel manifold."""

from .driver import SolverConfig, TraceRecord, obcd_run, stationarity_measure, verify_sufficient_decrease
from .estimator import OBCDSparsePCA
from .exceptions import (
    DegeneratePolynomial,
    EmptyModel,
    GradientCheckFailed,
    InfeasibleStart,
    InfeasibleSubproblem,
    MalformedCsv,
    NotOrthogonal,
    NotPSD,
    NotSymmetric,
    NotTrigPolynomial,
    OBCDError,
    RankDeficient,
    TooFewRows,
)
from .linalg import (
    IDENTITY,
    Branch,
    PlanarOrthogonal,
    WorkingSet,
    apply_planar_update,
    compose_planar,
    gram_residual,
    jacobi_givens_decompose,
    nearest_orthogonal_2x2,
    qr_orthonormalize,
)
from .problems import (
    NlepData,
    ProblemInstance,
    SolverMode,
    covariance,
    gen_randn,
    init_identity,
    init_nonneg_orthogonal,
    init_random_orthogonal,
    load_csv,
    make_l0_spca,
    make_l1_spca,
    make_nlep,
    make_nn_pca,
    make_pca,
    make_quadratic,
    pinv_psd,
)
from .quartic import real_roots
from .subproblem import QPolicy, RegularizerSpec, TrigPoly, bsm_solve, fim_solve, fit_harmonics
from .working_set import WssKind, WssStrategy, score_or, score_sv

__version__ = "0.1.0"
