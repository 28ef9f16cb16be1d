"""Dynamic linear panel estimation with bias corrections.

Fixed-effects and one-step Arellano-Bond GMM estimators for dynamic linear
panel models, together with analytical and split-sample corrections of their
high-dimensional biases, long-run effect inference with clustered and
bootstrap standard errors, and a seeded Monte Carlo lab that verifies the
bias-correction claims.
"""

from . import exceptions
from .ab import (
    ABFit,
    InstrumentSet,
    OneStepWeight,
    ab_cluster_cov,
    build_instruments,
    first_difference_band,
    fit_ab,
    one_step_weight,
)
from .debias import (
    CorrectionReport,
    debias_ab_split,
    debias_fe_analytic,
    debias_fe_split,
    nickell_bias,
)
from .design import (
    RegressionSample,
    SplitPartition,
    build_design,
    cross_split,
    time_split,
)
from .estimators import (
    ESTIMATOR_REGISTRY,
    AnalyticDebiasedFE,
    ArellanoBond,
    FixedEffects,
    SplitDebiasedAB,
    SplitDebiasedFE,
    make_estimator,
)
from .fe import FEFit, fe_cluster_cov, fit_fe
from .inference import (
    BootstrapResult,
    CovarianceEstimate,
    Diagnostic,
    LongRunEffect,
    cluster_bootstrap,
    delta_method_lr,
    long_run_effect,
    long_run_gradient,
    small_bias_diagnostic,
)
from .panel import BalancedPanel, difference, lag, load_panel, read_panel_csv
from .simulate import DGPConfig, StudyReport, mc_study, simulate_dgp

__version__ = "0.1.0"

__all__ = [
    "ABFit",
    "AnalyticDebiasedFE",
    "ArellanoBond",
    "BalancedPanel",
    "BootstrapResult",
    "CorrectionReport",
    "CovarianceEstimate",
    "DGPConfig",
    "Diagnostic",
    "ESTIMATOR_REGISTRY",
    "FEFit",
    "FixedEffects",
    "InstrumentSet",
    "LongRunEffect",
    "OneStepWeight",
    "RegressionSample",
    "SplitDebiasedAB",
    "SplitDebiasedFE",
    "SplitPartition",
    "StudyReport",
    "ab_cluster_cov",
    "build_design",
    "build_instruments",
    "cluster_bootstrap",
    "cross_split",
    "debias_ab_split",
    "debias_fe_analytic",
    "debias_fe_split",
    "delta_method_lr",
    "difference",
    "exceptions",
    "fe_cluster_cov",
    "first_difference_band",
    "fit_ab",
    "fit_fe",
    "lag",
    "load_panel",
    "long_run_effect",
    "long_run_gradient",
    "make_estimator",
    "mc_study",
    "nickell_bias",
    "one_step_weight",
    "read_panel_csv",
    "simulate_dgp",
    "small_bias_diagnostic",
    "time_split",
]
