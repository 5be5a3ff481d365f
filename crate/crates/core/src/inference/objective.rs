//! Complete-data log-likelihood, survival integral, evidence lower bound and
//! exact log-evidence on enumerable instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::assign::{AssignmentKind, AssignmentSet, ENUMERATION_LIMIT};
use crate::inference::triggers::TriggerCache;
use crate::model::{floored_ln, HyperParams, ModelParams, Trace, PROB_FLOOR};

/// A trace, its hyperparameters and the parameter-free cache built from them.
pub struct Problem<'a> {
    pub trace: &'a Trace,
    pub hyper: &'a HyperParams,
    pub cache: TriggerCache,
    /// When false the category term is dropped from the objective.
    pub use_category: bool,
}

impl<'a> Problem<'a> {
    pub fn new(trace: &'a Trace, hyper: &'a HyperParams) -> Result<Self> {
        trace.validate()?;
        let cache = TriggerCache::build(trace, hyper)?;
        Ok(Problem { trace, hyper, cache, use_category: true })
    }

    pub fn without_category(mut self) -> Self {
        self.use_category = false;
        self
    }

    pub fn check(&self, params: &ModelParams) -> Result<()> {
        params.validate()?;
        if params.n_users() != self.trace.n_users
            || params.n_categories() != self.trace.n_categories
            || params.n_communities() != self.hyper.n_communities
        {
            return Err(Error::domain("parameter shapes do not match the trace and hyperparameters"));
        }
        Ok(())
    }

    /// `λ_{i_n, g_n}(t_n, ℓ_n)` for every event under `assignment`.
    pub fn event_intensities(&self, params: &ModelParams, assignment: &[usize]) -> Vec<f64> {
        let events = &self.trace.events;
        events
            .iter()
            .enumerate()
            .map(|(n, e)| {
                let g = assignment[n];
                let mut lambda = params.mu[e.user] * params.eta[g];
                for &(k, w) in self.cache.parents(n) {
                    let k = k as usize;
                    if assignment[k] == g {
                        lambda += params.a[(events[k].user, e.user)] * w;
                    }
                }
                lambda
            })
            .collect()
    }

    /// `Σ_n log λ_{i_n, g_n}`, floored, summed in event order.
    pub fn log_intensity_sum(&self, params: &ModelParams, assignment: &[usize]) -> f64 {
        self.event_intensities(params, assignment).into_iter().map(floored_ln).sum()
    }

    pub fn survival(&self, params: &ModelParams) -> f64 {
        self.cache.survival(params)
    }

    /// Every term of the complete-data log-likelihood under one assignment.
    pub fn likelihood_terms(&self, params: &ModelParams, assignment: &[usize]) -> LikelihoodTerms {
        let mut pi_term = 0.0;
        let mut theta_term = 0.0;
        for (e, &g) in self.trace.events.iter().zip(assignment) {
            pi_term += floored_ln(params.pi[(e.user, g)]);
            if self.use_category {
                theta_term += floored_ln(params.theta[(g, e.category)]);
            }
        }
        LikelihoodTerms {
            excitation: self.log_intensity_sum(params, assignment),
            pi_term,
            theta_term,
            survival: self.survival(params),
        }
    }

    /// ELBO over a weighted assignment set. The `E_q[log λ]` term is the
    /// weighted sum over the set; every other term is closed form.
    pub fn elbo(&self, params: &ModelParams, set: &AssignmentSet) -> ElboEstimate {
        let sums: Vec<f64> = set.assignments.par_iter().map(|g| self.log_intensity_sum(params, g)).collect();
        self.elbo_from_sums(params, set, &sums)
    }

    /// ELBO from per-sample intensities already computed for this parameter value.
    pub fn elbo_from_intensities(&self, params: &ModelParams, set: &AssignmentSet, lambdas: &[Vec<f64>]) -> ElboEstimate {
        let sums: Vec<f64> = lambdas.iter().map(|l| l.iter().map(|v| floored_ln(*v)).sum()).collect();
        self.elbo_from_sums(params, set, &sums)
    }

    fn elbo_from_sums(&self, params: &ModelParams, set: &AssignmentSet, sums: &[f64]) -> ElboEstimate {
        let excitation = if set.kind == AssignmentKind::Degenerate && set.weights == [1.0] {
            sums[0]
        } else {
            sums.iter().zip(&set.weights).map(|(s, w)| s * w).sum()
        };
        self.elbo_from_excitation(params, excitation, set.len())
    }

    pub(crate) fn elbo_from_excitation(&self, params: &ModelParams, excitation: f64, samples: usize) -> ElboEstimate {
        let mut pi_term = 0.0;
        let mut theta_term = 0.0;
        let mut entropy = 0.0;
        for e in &self.trace.events {
            let phi = params.phi.row(e.user);
            pi_term += phi.iter().zip(params.pi.row(e.user)).map(|(q, p)| q * floored_ln(*p)).sum::<f64>();
            if self.use_category {
                theta_term += phi
                    .iter()
                    .enumerate()
                    .map(|(m, q)| q * floored_ln(params.theta[(m, e.category)]))
                    .sum::<f64>();
            }
            entropy += -phi.iter().map(|q| q * floored_ln(*q)).sum::<f64>();
        }
        let survival = self.survival(params);
        let value = excitation + pi_term + theta_term - survival + entropy;
        ElboEstimate { value, excitation, pi_term, theta_term, survival, entropy, samples }
    }

    /// Log-evidence `log Σ_g p(data, g)` by enumeration, with `p(g) = Π_n π[i_n][g_n]`.
    pub fn log_evidence(&self, params: &ModelParams) -> Result<f64> {
        let m = params.n_communities();
        let uniform = crate::matrix::Matrix::filled(params.n_users(), m, 1.0);
        let set = AssignmentSet::enumerate(self.trace, &uniform, ENUMERATION_LIMIT)?;
        let joint: Vec<f64> = set.assignments.par_iter().map(|g| self.likelihood_terms(params, g).value()).collect();
        let peak = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(peak + joint.iter().map(|v| (v - peak).exp()).sum::<f64>().ln())
    }
}

/// Terms of the complete-data log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodTerms {
    pub excitation: f64,
    pub pi_term: f64,
    pub theta_term: f64,
    pub survival: f64,
}

impl LikelihoodTerms {
    pub fn value(&self) -> f64 {
        self.excitation + self.pi_term + self.theta_term - self.survival
    }
}

/// ELBO value with its breakdown. `value` is the sum of the terms with the
/// survival integral subtracted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboEstimate {
    pub value: f64,
    /// `E_q[Σ_n log λ_{i_n, g_n}]`, estimated or exact.
    pub excitation: f64,
    pub pi_term: f64,
    pub theta_term: f64,
    pub survival: f64,
    pub entropy: f64,
    pub samples: usize,
}

/// Complete-data log-likelihood with the trace's own community labels.
pub fn complete_log_likelihood(params: &ModelParams, hyper: &HyperParams, trace: &Trace) -> Result<f64> {
    let problem = Problem::new(trace, hyper)?;
    problem.check(params)?;
    let labels = AssignmentSet::from_labels(trace)?;
    let m = params.n_communities();
    if let Some(&g) = labels.assignments[0].iter().find(|&&g| g >= m) {
        return Err(Error::IndexOutOfRange { what: "community", index: g, bound: m });
    }
    Ok(problem.likelihood_terms(params, &labels.assignments[0]).value())
}

/// `Σ_i ∫∫ λ_i dt dℓ` over the observation window. Every history event
/// belongs to exactly one community, so the value does not depend on the
/// community assignment.
pub fn survival_integral(params: &ModelParams, hyper: &HyperParams, trace: &Trace) -> Result<f64> {
    let cache = TriggerCache::build(trace, hyper)?;
    Ok(cache.survival(params))
}

/// Monte-Carlo ELBO with `samples` draws from q, seeded from `hyper.seed`.
pub fn elbo(params: &ModelParams, hyper: &HyperParams, trace: &Trace, samples: usize) -> Result<ElboEstimate> {
    let problem = Problem::new(trace, hyper)?;
    problem.check(params)?;
    let set = AssignmentSet::sample(trace, &params.phi, samples, hyper.seed, 0)?;
    Ok(problem.elbo(params, &set))
}

/// ELBO with `E_q[log λ]` computed by exhaustive enumeration.
pub fn exact_elbo(params: &ModelParams, hyper: &HyperParams, trace: &Trace) -> Result<ElboEstimate> {
    let problem = Problem::new(trace, hyper)?;
    problem.check(params)?;
    let set = AssignmentSet::enumerate(trace, &params.phi, ENUMERATION_LIMIT)?;
    Ok(problem.elbo(params, &set))
}

pub fn log_evidence(params: &ModelParams, hyper: &HyperParams, trace: &Trace) -> Result<f64> {
    let problem = Problem::new(trace, hyper)?;
    problem.check(params)?;
    problem.log_evidence(params)
}

/// `log(max(λ, ε))` has zero derivative where the floor binds.
#[inline]
pub(crate) fn floored_inverse(lambda: f64) -> f64 {
    if lambda > PROB_FLOOR {
        1.0 / lambda
    } else {
        0.0
    }
}
