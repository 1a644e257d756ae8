"""Logistic regression with misclassified binary responses.

Plug-in (pseudo-likelihood) estimation using an internal validation
sample, competing joint / contaminated-data / naive estimators, plug-in
sandwich covariance, a two-sample nonparametric bootstrap with percentile
intervals, differential-misclassification and one-sided variants, and a
Monte Carlo harness for bias/MSE and coverage studies.
"""

__version__ = "0.1.0"

from .bootstrap import (
    BootstrapConfig,
    BootstrapDraws,
    ReplicateStatus,
    percentile_ci_linear,
    percentile_ci_risk,
    percentile_quantile,
    resample,
    run_bootstrap,
)
from .covariance import (
    CovarianceBundle,
    bundle_from_fit,
    estimate_bundle,
    linear_functional_ci,
    risk_ci_delta,
    wald_ci,
)
from .data import (
    CovariateVector,
    Dataset,
    MisclassProbs,
    NonValidationObs,
    RegressionCoef,
    ValidationObs,
)
from .errors import (
    DegenerateError,
    DomainError,
    IdentifiabilityError,
    InsufficientSuccesses,
    MisclassitError,
    NonConvergence,
    SchemaError,
    SingularJacobian,
    SingularZdot,
)
from .estimators import (
    FitResult,
    FitWarning,
    Method,
    fit_cmle,
    fit_jmle,
    fit_naive,
    fit_pmle,
)
from .extensions import (
    GroupedDataset,
    fit_pmle_grouped,
    fit_pmle_theta2_zero,
    grouped_covariance,
    theta2_zero_covariance,
)
from .model import (
    h1,
    h2,
    h3,
    pseudo_loglik,
    psi,
    score,
    score_jacobian,
    population_score_jacobian,
)
from .simulate import (
    SimConfig,
    SimModel,
    SimSummary,
    eta_design,
    generate_dataset,
    model_a,
    model_b,
    model_c,
    model_p9,
    run_bias_mse_study,
    run_coverage_study,
    sigma_of_eta,
)
from .solver import NewtonDiagnostics, SolverOptions, newton_root
from .theta import (
    CellCounts,
    ThetaEstimate,
    count_cells,
    estimate_theta,
    estimate_theta_from_dataset,
    theta_asymptotic_cov,
)
