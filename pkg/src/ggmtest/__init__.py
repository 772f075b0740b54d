"""Two-sample equality testing for Gaussian graphical models.

The package tests whether two samples share one multivariate normal
distribution, localizes differences to individual nodes or small node
subsets through leave-k-out increments of a Bartlett-adjusted likelihood
ratio statistic, selects altered nodes under family-wise error control,
and ships a deterministic Monte Carlo harness for calibration and power
studies.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateCorrection,
    DomainError,
    GgmTestError,
    NotPositiveDefinite,
    ParseError,
    SchemaMismatch,
    SingularCovariance,
    TooFewRows,
)
from .linalg import SpdFactor, cholesky, covariance_mle, log_det, mean_vector
from .chi2 import (
    chi2_cdf,
    chi2_pdf,
    chi2_quantile,
    chi2_sf,
    ln_gamma,
    noncentral_chi2_cdf,
    noncentral_chi2_pdf,
    noncentral_chi2_sf,
    reg_gamma_lower,
    reg_gamma_upper,
)
from .rng import RandomSource, derive_stream, mix64, mvn_sample
from .lrt import (
    GlobalTestResult,
    NodeSet,
    SubsetIncrement,
    TwoSampleData,
    adjusted_t,
    bartlett_delta,
    bartlett_mu,
    dof_global,
    dof_increment,
    enumerate_subsets,
    increment,
    increment_scan,
    lrt_w,
    restrict,
)
from .fwer import PValueFamily, SelectionResult, bonferroni, holm, select_nodes
from .simulate import (
    MonteCarloSummary,
    Mu0Sigma0,
    NodeDiagnostic,
    ReplicateOutcome,
    ScenarioSpec,
    ar1_covariance,
    conjecture_check,
    estimate_noncentrality,
    ks_statistic,
    null_params,
    perturb_params,
    run_scenario,
    simulate_replicate,
)
from .dataio import parse_dataset, parse_scenario_grid
from .report import ReportBundle, emit_report, load_report

__all__ = [
    "__version__",
    "GgmTestError",
    "DomainError",
    "NotPositiveDefinite",
    "SingularCovariance",
    "DegenerateCorrection",
    "ParseError",
    "SchemaMismatch",
    "TooFewRows",
    "ConfigError",
    "SpdFactor",
    "cholesky",
    "log_det",
    "mean_vector",
    "covariance_mle",
    "ln_gamma",
    "reg_gamma_lower",
    "reg_gamma_upper",
    "chi2_sf",
    "chi2_cdf",
    "chi2_pdf",
    "chi2_quantile",
    "noncentral_chi2_sf",
    "noncentral_chi2_cdf",
    "noncentral_chi2_pdf",
    "RandomSource",
    "derive_stream",
    "mix64",
    "mvn_sample",
    "NodeSet",
    "TwoSampleData",
    "GlobalTestResult",
    "SubsetIncrement",
    "dof_global",
    "dof_increment",
    "lrt_w",
    "bartlett_mu",
    "bartlett_delta",
    "adjusted_t",
    "restrict",
    "increment",
    "enumerate_subsets",
    "increment_scan",
    "PValueFamily",
    "SelectionResult",
    "bonferroni",
    "holm",
    "select_nodes",
    "ScenarioSpec",
    "Mu0Sigma0",
    "ReplicateOutcome",
    "MonteCarloSummary",
    "NodeDiagnostic",
    "ar1_covariance",
    "null_params",
    "perturb_params",
    "simulate_replicate",
    "run_scenario",
    "ks_statistic",
    "estimate_noncentrality",
    "conjecture_check",
    "parse_dataset",
    "parse_scenario_grid",
    "ReportBundle",
    "emit_report",
    "load_report",
]
