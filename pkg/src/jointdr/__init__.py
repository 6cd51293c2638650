"""Joint dimensionality reduction for two feature vectors.

Estimates the embeddings ``U`` and ``V`` of a model ``y ~ f(U^T a, V^T b)``
from the linear moment ``(1/m) sum_i a_i y_i b_i^T`` by rank-r truncation or
sparse sequential projection, with synthetic generators, error metrics, a
pHd baseline and a seeded experiment harness.
"""

__version__ = "0.1.0"

from .baselines import PhdResult, phd_estimate, phd_matrix, phd_split_error
from .errors import (
    ConfigError,
    DimensionError,
    EmptyInputError,
    InputError,
    JointDRError,
    NotOrthonormalError,
    NotPositiveDefiniteError,
    NumericalError,
    SingularCovarianceError,
)
from .estimator import (
    EmbeddingEstimate,
    LinearEstimate,
    MomentSpec,
    SampleSet,
    estimate_moments,
    estimate_rank,
    estimate_sparsity,
    linear_estimate,
    membership_violations,
    project_col_entries,
    project_col_select,
    project_row_select,
    rank_r_truncate,
    sparse_estimate,
    sparse_truncate,
    whiten,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    RobustnessReport,
    default_config,
    emit,
    load_config,
    load_result,
    run_experiment,
    run_robustness,
)
from .metrics import LinkConstants, SlopeFit, link_constants_mc, nsee, slope_fit, subspace_error
from .synthetic import (
    EmbeddingPair,
    FeatureDistribution,
    LinkModel,
    TailReport,
    check_light_tail,
    derive_seed,
    generate_samples,
    responses,
    sample_problem,
)

__all__ = [
    "__version__",
    "PhdResult",
    "phd_estimate",
    "phd_matrix",
    "phd_split_error",
    "ConfigError",
    "DimensionError",
    "EmptyInputError",
    "InputError",
    "JointDRError",
    "NotOrthonormalError",
    "NotPositiveDefiniteError",
    "NumericalError",
    "SingularCovarianceError",
    "EmbeddingEstimate",
    "LinearEstimate",
    "MomentSpec",
    "SampleSet",
    "estimate_moments",
    "estimate_rank",
    "estimate_sparsity",
    "linear_estimate",
    "membership_violations",
    "project_col_entries",
    "project_col_select",
    "project_row_select",
    "rank_r_truncate",
    "sparse_estimate",
    "sparse_truncate",
    "whiten",
    "ExperimentConfig",
    "ExperimentResult",
    "RobustnessReport",
    "default_config",
    "emit",
    "load_config",
    "load_result",
    "run_experiment",
    "run_robustness",
    "LinkConstants",
    "SlopeFit",
    "link_constants_mc",
    "nsee",
    "slope_fit",
    "subspace_error",
    "EmbeddingPair",
    "FeatureDistribution",
    "LinkModel",
    "TailReport",
    "check_light_tail",
    "derive_seed",
    "generate_samples",
    "responses",
    "sample_problem",
]
