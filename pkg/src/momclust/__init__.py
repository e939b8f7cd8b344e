"""momclust: model-based clustering of longitudinal ordinal data.

Finite mixtures of matrix-variate normals over latent continuous matrices,
estimated with a Monte-Carlo EM algorithm, with BIC model selection,
continuous baselines, a synthetic-data generator and evaluation metrics.
"""

from .matvar import (
    ClusterParams,
    MixtureModel,
    kron_cov,
    log_density,
    normalize_scale,
    param_count,
    sample,
    unvec,
    vec,
)
from .ordinal import (
    Box,
    OrdinalDataset,
    Thresholds,
    default_thresholds,
    discretize,
    pattern_box,
    validate,
)
from .trunc import (
    GibbsConfig,
    MomentEstimates,
    ProbEstimate,
    box_probability,
    gibbs_truncated_mvn,
    sample_univ_truncnorm,
    truncated_moments,
)
from .mom import (
    DegenerateClusterError,
    EStepQuantities,
    FitConfig,
    FitResult,
    SelectionTable,
    UnderflowError,
    bic,
    classify,
    e_step,
    fit,
    init_params,
    m_step,
    observed_loglik,
    select_k,
)
from .baselines import GmmFitResult, gmm_fit, mmn_fit
from .simulate import Scenario, SimulatedDataset, generate, oracle_ari, benchmark_scenario
from .evalmetrics import MapeReport, align_clusters, ari, mape

__version__ = "0.1.0"
