"""Joint EMOS post-processing of wind speed and temperature ensemble
forecasts with a zero-truncated bivariate normal predictive law, plus
independent-margin and Gaussian-copula baselines and multivariate
verification scores.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .copula import CopulaModel, copula_sample, estimate_correlation
from .distributions import (
    InvalidScaleError,
    MomentPair,
    TruncBivariateNormal,
    UnivariateLaw,
    crps_normal,
    crps_truncnormal,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    tbn_logpdf,
    tbn_moments,
    tbn_sample,
    univ_cdf,
    univ_quantile,
)
from .emos import (
    BivariateEmosParams,
    ForecastCase,
    GroupSpec,
    UnivariateEmosParams,
    ensemble_stats,
    fit_bivariate,
    fit_univariate,
    mean_log_score,
    predictive_law,
)
from .optimize import OptimizerConfig, OptimResult, minimize
from .pipeline import (
    Dataset,
    ExperimentConfig,
    ExperimentResult,
    FittedModels,
    TimingRecord,
    WindowPlan,
    build_window_plan,
    load_dataset,
    rolling_calibrate,
    run_experiment,
    save_dataset,
    synthesize_dataset,
)
from .synthetic import SyntheticSpec
from .verification import (
    RankHistogram,
    ScoreReport,
    delta_uniform_quantile,
    determinant_sharpness,
    energy_score_ensemble,
    energy_score_mc,
    multivariate_rank,
    rank_histogram,
    reliability_index,
    spatial_median,
)

__version__ = "0.1.0"
