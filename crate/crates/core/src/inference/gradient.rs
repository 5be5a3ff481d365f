//! Gradients of the ELBO. Parameter gradients differentiate the estimate for a
//! fixed assignment set; the φ gradient is a score-function estimator in the
//! logits of φ, plus the closed-form derivatives of the π, θ and entropy terms.

use rayon::prelude::*;

use crate::error::Result;
use crate::inference::assign::{AssignmentKind, AssignmentSet};
use crate::inference::objective::{floored_inverse, Problem};
use crate::matrix::Matrix;
use crate::model::{floored_ln, HyperParams, ModelParams, Trace, PROB_FLOOR};

/// `Σ_s w_s Σ_n ∂ log λ_n / ∂θ` for μ, η and A: the data part of each gradient,
/// before the survival derivative is subtracted.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationStats {
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    pub a: Matrix,
}

impl ExcitationStats {
    fn zeros(params: &ModelParams) -> Self {
        ExcitationStats {
            mu: vec![0.0; params.n_users()],
            eta: vec![0.0; params.n_communities()],
            a: Matrix::zeros(params.n_users(), params.n_users()),
        }
    }

    fn add_scaled(&mut self, other: &ExcitationStats, w: f64) {
        self.mu.iter_mut().zip(&other.mu).for_each(|(x, y)| *x += w * y);
        self.eta.iter_mut().zip(&other.eta).for_each(|(x, y)| *x += w * y);
        self.a.as_mut_slice().iter_mut().zip(other.a.as_slice()).for_each(|(x, y)| *x += w * y);
    }
}

/// Gradients of the ELBO estimate with respect to the raw parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    pub a: Matrix,
    pub theta: Matrix,
}

impl Problem<'_> {
    fn sample_stats(&self, params: &ModelParams, assignment: &[usize], lambda: &[f64]) -> ExcitationStats {
        let events = &self.trace.events;
        let mut stats = ExcitationStats::zeros(params);
        for (n, e) in events.iter().enumerate() {
            let inv = floored_inverse(lambda[n]);
            if inv == 0.0 {
                continue;
            }
            let g = assignment[n];
            stats.mu[e.user] += params.eta[g] * inv;
            stats.eta[g] += params.mu[e.user] * inv;
            for &(k, w) in self.cache.parents(n) {
                let k = k as usize;
                if assignment[k] == g {
                    stats.a[(events[k].user, e.user)] += w * inv;
                }
            }
        }
        stats
    }

    /// Data parts of the μ, η, A gradients, reusing per-sample intensities.
    pub fn excitation_stats(&self, params: &ModelParams, set: &AssignmentSet, lambdas: &[Vec<f64>]) -> ExcitationStats {
        let first = set.first_occurrences();
        let unique: Vec<usize> = (0..set.len()).filter(|&s| first[s] == s).collect();
        let per_unique: Vec<ExcitationStats> = unique
            .par_iter()
            .map(|&s| self.sample_stats(params, &set.assignments[s], &lambdas[s]))
            .collect();
        let mut weights = vec![0.0; set.len()];
        for (s, &w) in set.weights.iter().enumerate() {
            weights[first[s]] += w;
        }
        let mut total = ExcitationStats::zeros(params);
        for (stats, &s) in per_unique.iter().zip(&unique) {
            total.add_scaled(stats, weights[s]);
        }
        total
    }

    /// Per-sample event intensities.
    /// Repeated assignments are evaluated once.
    pub fn sample_intensities(&self, params: &ModelParams, set: &AssignmentSet) -> Vec<Vec<f64>> {
        let first = set.first_occurrences();
        let unique: Vec<usize> = (0..set.len()).filter(|&s| first[s] == s).collect();
        let computed: Vec<Vec<f64>> =
            unique.par_iter().map(|&s| self.event_intensities(params, &set.assignments[s])).collect();
        let mut slot = vec![usize::MAX; set.len()];
        for (u, &s) in unique.iter().enumerate() {
            slot[s] = u;
        }
        (0..set.len()).map(|s| computed[slot[first[s]]].clone()).collect()
    }

    /// `∂ (Σ_n φ_{i_n}·log θ_{·,c_n}) / ∂θ`.
    pub fn theta_gradient(&self, params: &ModelParams) -> Matrix {
        let mut grad = Matrix::zeros(params.n_communities(), params.n_categories());
        if !self.use_category {
            return grad;
        }
        for e in &self.trace.events {
            for (g, q) in params.phi.row(e.user).iter().enumerate() {
                let theta = params.theta[(g, e.category)];
                if theta > PROB_FLOOR {
                    grad[(g, e.category)] += q / theta;
                }
            }
        }
        grad
    }

    pub fn param_gradients_from(&self, params: &ModelParams, stats: &ExcitationStats) -> ParamGradients {
        let volume = self.cache.base_volume;
        let eta_sum: f64 = params.eta.iter().sum();
        let mu_sum: f64 = params.mu.iter().sum();
        let mu = stats.mu.iter().map(|s| s - eta_sum * volume).collect();
        let eta = stats.eta.iter().map(|s| s - mu_sum * volume).collect();
        let mut a = stats.a.clone();
        a.as_mut_slice()
            .iter_mut()
            .zip(self.cache.survival_coeff.as_slice())
            .for_each(|(g, d)| *g -= d);
        ParamGradients { mu, eta, a, theta: self.theta_gradient(params) }
    }

    pub fn param_gradients(&self, params: &ModelParams, set: &AssignmentSet) -> ParamGradients {
        let lambdas = self.sample_intensities(params, set);
        let stats = self.excitation_stats(params, set, &lambdas);
        self.param_gradients_from(params, &stats)
    }

    /// Score-function part of the logit gradient. Each event's log-intensity is
    /// paired only with the scores of the events it depends on (itself and its
    /// parents with positive influence). With `baseline`, the mean of the
    /// event's log-intensity over the other samples is subtracted.
    pub fn score_gradient(&self, params: &ModelParams, set: &AssignmentSet, lambdas: &[Vec<f64>], baseline: bool) -> Matrix {
        let (n_users, m) = (params.n_users(), params.n_communities());
        let events = &self.trace.events;
        let s_count = set.len();
        let logs: Vec<Vec<f64>> = lambdas.iter().map(|l| l.iter().map(|v| floored_ln(*v)).collect()).collect();
        let use_baseline = baseline && s_count > 1 && set.kind == AssignmentKind::Sampled;
        if use_baseline && set.first_occurrences().iter().all(|&f| f == 0) {
            // Every log-intensity equals its leave-one-out mean.
            return Matrix::zeros(n_users, m);
        }
        let totals: Vec<f64> = if use_baseline {
            (0..events.len()).map(|n| logs.iter().map(|l| l[n]).sum()).collect()
        } else {
            Vec::new()
        };
        let per_sample: Vec<(Matrix, Vec<f64>)> = (0..s_count)
            .into_par_iter()
            .map(|s| {
                let g = &set.assignments[s];
                let mut hits = Matrix::zeros(n_users, m);
                let mut mass = vec![0.0; n_users];
                for (n, e) in events.iter().enumerate() {
                    let mut coef = logs[s][n];
                    if use_baseline {
                        coef -= (totals[n] - logs[s][n]) / (s_count - 1) as f64;
                    }
                    if coef == 0.0 {
                        continue;
                    }
                    hits[(e.user, g[n])] += coef;
                    mass[e.user] += coef;
                    for &(k, _) in self.cache.parents(n) {
                        let k = k as usize;
                        let src = events[k].user;
                        if params.a[(src, e.user)] > 0.0 {
                            hits[(src, g[k])] += coef;
                            mass[src] += coef;
                        }
                    }
                }
                (hits, mass)
            })
            .collect();
        let mut grad = Matrix::zeros(n_users, m);
        for ((hits, mass), &w) in per_sample.iter().zip(&set.weights) {
            for j in 0..n_users {
                for q in 0..m {
                    grad[(j, q)] += w * (hits[(j, q)] - mass[j] * params.phi[(j, q)]);
                }
            }
        }
        grad
    }

    /// Logit gradient of the π, θ and entropy terms.
    pub fn closed_form_phi_gradient(&self, params: &ModelParams) -> Matrix {
        let (n_users, m) = (params.n_users(), params.n_communities());
        let mut v = Matrix::zeros(n_users, m);
        let counts: Vec<f64> = self.cache.user_events.iter().map(|u| u.len() as f64).collect();
        if self.use_category {
            for e in &self.trace.events {
                for q in 0..m {
                    v[(e.user, q)] += floored_ln(params.theta[(q, e.category)]);
                }
            }
        }
        let mut grad = Matrix::zeros(n_users, m);
        for j in 0..n_users {
            if counts[j] == 0.0 {
                continue;
            }
            let phi = params.phi.row(j);
            for q in 0..m {
                let entropy = floored_ln(phi[q]) + if phi[q] > PROB_FLOOR { 1.0 } else { 0.0 };
                v[(j, q)] += counts[j] * (floored_ln(params.pi[(j, q)]) - entropy);
            }
            let mean: f64 = (0..m).map(|q| phi[q] * v[(j, q)]).sum();
            for q in 0..m {
                grad[(j, q)] = phi[q] * (v[(j, q)] - mean);
            }
        }
        grad
    }

    /// Full logit gradient for a given assignment set.
    pub fn phi_gradient(&self, params: &ModelParams, set: &AssignmentSet, baseline: bool) -> Matrix {
        let lambdas = self.sample_intensities(params, set);
        let mut grad = self.score_gradient(params, set, &lambdas, baseline);
        let closed = self.closed_form_phi_gradient(params);
        grad.as_mut_slice().iter_mut().zip(closed.as_slice()).for_each(|(g, c)| *g += c);
        grad
    }
}

/// Monte-Carlo ELBO gradient in the logits of φ, `samples` draws seeded from
/// `hyper.seed`, with the leave-one-out baseline.
pub fn grad_phi(params: &ModelParams, hyper: &HyperParams, trace: &Trace, samples: usize) -> Result<Matrix> {
    let problem = Problem::new(trace, hyper)?;
    problem.check(params)?;
    let set = AssignmentSet::sample(trace, &params.phi, samples, hyper.seed, 0)?;
    Ok(problem.phi_gradient(params, &set, true))
}

/// Gradients for μ, η, A and θ with the given community samples reused for every block.
pub fn grad_params(params: &ModelParams, hyper: &HyperParams, trace: &Trace, set: &AssignmentSet) -> Result<ParamGradients> {
    let problem = Problem::new(trace, hyper)?;
    problem.check(params)?;
    Ok(problem.param_gradients(params, set))
}
