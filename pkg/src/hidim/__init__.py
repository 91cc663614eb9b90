"""High-dimensional inference toolkit.

Two-sample mean-vector tests for p >> n (asymptotic, random-projection, and
dependent-observation variants), covariance structure estimation and tests,
and discrete multivariate models, with a seeded Monte Carlo harness and CLI.
"""

from .core import (
    ConvergenceError,
    DataMatrix,
    DimensionError,
    FactorModelSpec,
    NumericalError,
    RngStream,
    TestResult,
    TwoSample,
    as_generator,
    child_generators,
    generate_factor_sample,
    load_data_matrix,
    pooled_covariance,
    sample_mean,
    save_data_matrix,
    sym_eigen,
)
from .mean_iid import (
    TraceEstimates,
    assumption_diagnostics,
    bai_saranadasa,
    chen_qin,
    chung_fraser,
    clx_max_test,
    condition_ratios,
    cq_trace_estimates,
    dempster,
    gct_aggregate,
    hotelling_t2,
    park_ayyala,
    pct,
    srivastava_du,
    zoh_bayes_factor,
)
from .covariance import (
    BandedEstimate,
    PenaltySpec,
    band_matrix,
    banded_covariance,
    equality_lrt,
    equality_lrt_corrected,
    gaussian_loglik_cov,
    gaussian_loglik_prec,
    identity_test_vn,
    identity_test_wn,
    li_chen_functional,
    li_chen_test,
    penalized_objective,
    projected_structure_test,
    schott_fn,
    schott_test,
    sphericity_test_un,
    u_functional,
    v_functional,
    w_functional,
)
from .mean_dependent import (
    AutocovTraceSet,
    StationaryProcessSpec,
    apr_test,
    autocov_biased,
    debiased_traces,
    generate_ma_process,
    m_n_functional,
    theta_coefficient,
)
from .projection import (
    ProjectionMatrix,
    ProjectionSpec,
    generate_projection,
    projected_hotelling,
    raptt,
    raptt_cutoff,
    scan_k,
    t2_random_projection,
)
from .discrete import (
    BivariatePoissonParams,
    CountVector,
    DirMultFit,
    DirMultParams,
    MultinomialParams,
    MvBernoulliParams,
    bivpois_logpmf,
    bivpois_sample_norta,
    dirmult_fit,
    dirmult_logpmf,
    dirmult_moments,
    levin_cdf,
    multinomial_logpmf,
    multinomial_mle,
    multinomial_two_sample,
    mvbernoulli_logpmf,
    mvbernoulli_marginal,
    mvpois_sample_compound,
    mvpois_sample_latent,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DataMatrix",
    "DimensionError",
    "FactorModelSpec",
    "NumericalError",
    "RngStream",
    "TestResult",
    "TwoSample",
    "as_generator",
    "child_generators",
    "generate_factor_sample",
    "load_data_matrix",
    "pooled_covariance",
    "sample_mean",
    "save_data_matrix",
    "sym_eigen",
    "TraceEstimates",
    "assumption_diagnostics",
    "bai_saranadasa",
    "chen_qin",
    "chung_fraser",
    "clx_max_test",
    "condition_ratios",
    "cq_trace_estimates",
    "dempster",
    "gct_aggregate",
    "hotelling_t2",
    "park_ayyala",
    "pct",
    "srivastava_du",
    "zoh_bayes_factor",
    "BandedEstimate",
    "PenaltySpec",
    "band_matrix",
    "banded_covariance",
    "equality_lrt",
    "equality_lrt_corrected",
    "gaussian_loglik_cov",
    "gaussian_loglik_prec",
    "identity_test_vn",
    "identity_test_wn",
    "li_chen_functional",
    "li_chen_test",
    "penalized_objective",
    "projected_structure_test",
    "schott_fn",
    "schott_test",
    "sphericity_test_un",
    "u_functional",
    "v_functional",
    "w_functional",
    "AutocovTraceSet",
    "StationaryProcessSpec",
    "apr_test",
    "autocov_biased",
    "debiased_traces",
    "generate_ma_process",
    "m_n_functional",
    "theta_coefficient",
    "ProjectionMatrix",
    "ProjectionSpec",
    "generate_projection",
    "projected_hotelling",
    "raptt",
    "raptt_cutoff",
    "scan_k",
    "t2_random_projection",
    "BivariatePoissonParams",
    "CountVector",
    "DirMultFit",
    "DirMultParams",
    "MultinomialParams",
    "MvBernoulliParams",
    "bivpois_logpmf",
    "bivpois_sample_norta",
    "dirmult_fit",
    "dirmult_logpmf",
    "dirmult_moments",
    "levin_cdf",
    "multinomial_logpmf",
    "multinomial_mle",
    "multinomial_two_sample",
    "mvbernoulli_logpmf",
    "mvbernoulli_marginal",
    "mvpois_sample_compound",
    "mvpois_sample_latent",
    "__version__",
]
