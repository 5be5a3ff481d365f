//! Stochastic variational EM for the community Hawkes model.

pub mod assign;
pub mod fit;
pub mod gradient;
pub mod objective;
pub mod triggers;

pub use assign::{AssignmentKind, AssignmentSet, ENUMERATION_LIMIT};
pub use fit::{fit, fit_with, initial_params, moving_average, Ablation, FitOptions, FitReport, LearnFlags, NO_BASE_MU};
pub use gradient::{grad_params, grad_phi, ExcitationStats, ParamGradients};
pub use objective::{
    complete_log_likelihood, elbo, exact_elbo, log_evidence, survival_integral, ElboEstimate, LikelihoodTerms, Problem,
};
pub use triggers::TriggerCache;
