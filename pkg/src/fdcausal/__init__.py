"""Kernel independence tests and causal structure learning for functional data."""

__version__ = "0.1.0"

from .conditional import (
    LambdaSearchReport,
    RidgeWeights,
    conditional_test,
    cpt_permute,
    default_lambda_grid,
    hscic_statistic,
    hscic_values,
    lambda_search,
    ridge_weights,
)
from .discovery import (
    TestConfig,
    count_ci_tests,
    count_dags,
    enumerate_dags,
    learn_combined,
    learn_cpdag,
    meek_rules,
    orient_v_structures,
    pc_skeleton,
    resit_bivariate,
    resit_multivariate,
    sgs_skeleton,
)
from .errors import (
    DegenerateDataError,
    ExtrapolationError,
    IllConditionedError,
    InsufficientDataError,
    InvalidArgumentError,
    NumericalError,
)
from .funcdata import (
    BasisExpansion,
    FunctionalDataset,
    Mesh,
    fit_basis,
    fourier_basis_eval,
    interpolate_to_regular,
    rescale_domain,
)
from .graphs import MixedGraph
from .hflm import BetaSurface, HflmFit, fit_hflm, predict, residuals
from .kernels import GramMatrix, center, gram, l2_distance_sq, median_heuristic
from .marginal import dhsic_statistic, dhsic_test, hsic_statistic, hsic_test
from .metrics import GraphScore, precision, recall, score_graphs, shd, shd_norm
from .result import TestResult
from .synth import (
    GeneratorConfig,
    beta_paraboloid,
    gen_cond_data,
    gen_dag_data,
    gen_fourier_samples,
    gen_hflm_pair,
    gen_logistic_map,
    gen_nonlinearity_sweep,
    gen_random_dag,
)

__all__ = [name for name in dir() if not name.startswith("_")]
