//! Bayesian neural network regression and classification: likelihoods,
//! priors and samplers.

pub mod mcmc;
pub mod model;
pub mod prior;

pub use mcmc::{
    conjugate_sigma2_posterior, median, posterior_l2_error, run_adaptive_mcmc, run_mcmc, transport_parameters, AdaptiveConfig,
    ChainState, Init, L2Summary, McmcConfig, MoveStats, PosteriorChain,
};
pub use model::{
    log_likelihood, log_sigmoid, network_size_composite, network_size_for, sigmoid, truncate, BatchEvaluator, Dataset,
    DatasetMeta, ModelKind, ModelSpec,
};
pub use prior::{
    check_prior_lower_bound, log_prior, Covariance, Density, GaussianFactor, PriorBoundReport, PriorFamily, PriorSpec,
    SigmaPrior, WidthPrior, BOUND_CHECK_DIMS, T_INDEPENDENCE_TOL,
};
