//! Variational EM. Each epoch draws community samples from q, takes a
//! natural-gradient step on the logits of φ, sets π to φ, and applies damped
//! EM updates to μ, η and A (a gradient step preconditioned by the parameter
//! over its survival coefficient) and to θ. The step size decays as
//! `learning_rate / sqrt(epoch)`; a step of one is the exact EM update.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::assign::{AssignmentKind, AssignmentSet};
use crate::inference::objective::{ElboEstimate, Problem};
use crate::matrix::Matrix;
use crate::model::{floored_ln, HyperParams, ModelParams, Trace};
use crate::rng::stream;
use crate::simulate::dirichlet;

/// Base rate used when the base intensity is switched off.
pub const NO_BASE_MU: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    /// A frozen at zero.
    NoInfluence,
    /// μ frozen at [`NO_BASE_MU`].
    NoBase,
    /// Category term dropped from the objective and from scoring.
    NoCategory,
}

/// Which blocks are updated. Frozen blocks keep their initial values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnFlags {
    pub mu: bool,
    pub eta: bool,
    pub a: bool,
    pub theta: bool,
    pub phi: bool,
    /// π follows φ.
    pub pi: bool,
}

impl Default for LearnFlags {
    fn default() -> Self {
        LearnFlags { mu: true, eta: true, a: true, theta: true, phi: true, pi: true }
    }
}

impl LearnFlags {
    /// Only A and φ are learned.
    pub fn influence_and_posterior() -> Self {
        LearnFlags { mu: false, eta: false, a: true, theta: false, phi: true, pi: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub ablation: Ablation,
    pub learn: LearnFlags,
    /// Leave-one-out baseline in the score-function estimator.
    pub baseline: bool,
    /// Lower clamp on φ in the natural-gradient preconditioner.
    pub phi_precondition_floor: f64,
    /// Largest change of a single logit per epoch.
    pub max_logit_step: f64,
    /// Window of the moving average used for the convergence flag.
    pub convergence_window: usize,
    pub convergence_tol: f64,
    /// Stop once the convergence criterion holds.
    pub early_stop: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            ablation: Ablation::Full,
            learn: LearnFlags::default(),
            baseline: true,
            phi_precondition_floor: 1e-3,
            max_logit_step: 5.0,
            convergence_window: 10,
            convergence_tol: 1e-6,
            early_stop: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// ELBO at the start of each epoch, estimated on one fixed set of draws.
    pub elbo_trace: Vec<f64>,
    /// Estimate at the final parameters.
    pub final_elbo: ElboEstimate,
    pub params: ModelParams,
    pub wall_clock_secs: f64,
    pub converged: bool,
}

/// Moving average of `trace` over `window` epochs.
pub fn moving_average(trace: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || trace.len() < window {
        return Vec::new();
    }
    trace.windows(window).map(|w| w.iter().sum::<f64>() / window as f64).collect()
}

fn has_converged(trace: &[f64], window: usize, tol: f64) -> bool {
    if window == 0 || trace.len() < 2 * window {
        return false;
    }
    let tail = &trace[trace.len() - 2 * window..];
    let before = tail[..window].iter().sum::<f64>() / window as f64;
    let after = tail[window..].iter().sum::<f64>() / window as f64;
    (after - before).abs() <= tol * (1.0 + after.abs())
}

/// Data-driven starting point: half of each user's events attributed to the
/// base rate, the other half spread evenly over all influencers, θ from
/// smoothed category counts with random jitter, φ from a Dirichlet(1) draw.
pub fn initial_params(problem: &Problem<'_>, seed: u64) -> Result<ModelParams> {
    let trace = problem.trace;
    let hyper = problem.hyper;
    let (n_users, m, v) = (trace.n_users, hyper.n_communities, trace.n_categories);
    let volume = problem.cache.base_volume;
    let counts: Vec<f64> = problem.cache.user_events.iter().map(|u| u.len() as f64).collect();
    let mut rng = stream(seed, &[u64::MAX]);

    let mu: Vec<f64> = counts.iter().map(|c| 0.5 * c / volume).collect();
    let eta = vec![1.0 / m as f64; m];
    let d = &problem.cache.survival_coeff;
    let a = Matrix::from_fn(n_users, n_users, |_, i| {
        let total: f64 = d.column(i).sum();
        if total > 0.0 {
            0.5 * counts[i] / total
        } else {
            0.0
        }
    });

    let mut category_counts = vec![0.0; v];
    for e in &trace.events {
        category_counts[e.category] += 1.0;
    }
    let mut theta = Matrix::zeros(m, v);
    for g in 0..m {
        let jitter = dirichlet(1.0, v, &mut rng)?;
        for c in 0..v {
            theta[(g, c)] = (category_counts[c] + hyper.theta0[c]) * (0.5 + v as f64 * jitter[c]);
        }
    }
    theta.normalize_rows();
    let rows = (0..n_users).map(|_| dirichlet(1.0, m, &mut rng)).collect::<Result<Vec<_>>>()?;
    let phi = Matrix::from_rows(&rows)?;
    let params = ModelParams { mu, eta, a, theta, pi: phi.clone(), phi };
    params.validate()?;
    Ok(params)
}

fn check_finite(what: &str, values: &[f64], epoch: usize) -> Result<()> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{what} became {bad} at epoch {epoch}")));
    }
    Ok(())
}

fn apply_ablation(params: &mut ModelParams, options: &mut FitOptions) {
    match options.ablation {
        Ablation::Full => {}
        Ablation::NoInfluence => {
            params.a = Matrix::zeros(params.n_users(), params.n_users());
            options.learn.a = false;
        }
        Ablation::NoBase => {
            params.mu.iter_mut().for_each(|mu| *mu = NO_BASE_MU);
            options.learn.mu = false;
        }
        Ablation::NoCategory => {
            options.learn.theta = false;
        }
    }
}

/// Fits with default options, starting from `init` or from [`initial_params`].
pub fn fit(trace: &Trace, hyper: &HyperParams, init: Option<ModelParams>) -> Result<FitReport> {
    fit_with(trace, hyper, init, &FitOptions::default())
}

pub fn fit_with(trace: &Trace, hyper: &HyperParams, init: Option<ModelParams>, options: &FitOptions) -> Result<FitReport> {
    hyper.validate()?;
    let start = Instant::now();
    let mut problem = Problem::new(trace, hyper)?;
    if options.ablation == Ablation::NoCategory {
        problem = problem.without_category();
    }
    let mut options = options.clone();
    let mut params = match init {
        Some(p) => p,
        None => initial_params(&problem, hyper.seed)?,
    };
    apply_ablation(&mut params, &mut options);
    problem.check(&params)?;

    let learn = options.learn;
    let counts: Vec<f64> = problem.cache.user_events.iter().map(|u| u.len() as f64).collect();
    let mut elbo_trace = Vec::with_capacity(hyper.optim.epochs);
    for epoch in 1..=hyper.optim.epochs {
        // Above one the damped EM updates could leave the non-negative orthant.
        let rho = (hyper.optim.learning_rate / (epoch as f64).sqrt()).min(1.0);
        let set = AssignmentSet::sample(trace, &params.phi, hyper.n_samples, hyper.seed, epoch as u64)?;
        let lambdas = problem.sample_intensities(&params, &set);
        // Updates use fresh draws; the trace reuses one fixed stream so epochs compare on common draws.
        let estimate = match set.kind {
            AssignmentKind::Degenerate => problem.elbo_from_intensities(&params, &set, &lambdas),
            _ => {
                let fixed = AssignmentSet::sample(trace, &params.phi, hyper.n_samples, hyper.seed, 0)?;
                problem.elbo_from_intensities(&params, &fixed, &problem.sample_intensities(&params, &fixed))
            }
        };
        if !estimate.value.is_finite() {
            return Err(Error::Numerical(format!("ELBO is {} at epoch {epoch}: {estimate:?}", estimate.value)));
        }
        elbo_trace.push(estimate.value);
        let stats = problem.excitation_stats(&params, &set, &lambdas);
        check_finite("excitation statistics", &stats.mu, epoch)?;
        check_finite("excitation statistics", stats.a.as_slice(), epoch)?;

        if learn.phi {
            let mut grad = problem.score_gradient(&params, &set, &lambdas, options.baseline);
            let closed = problem.closed_form_phi_gradient(&params);
            grad.as_mut_slice().iter_mut().zip(closed.as_slice()).for_each(|(g, c)| *g += c);
            check_finite("phi gradient", grad.as_slice(), epoch)?;
            for j in 0..params.n_users() {
                if counts[j] == 0.0 {
                    continue;
                }
                let row = params.phi.row_mut(j);
                let mut logits: Vec<f64> = row
                    .iter()
                    .zip(grad.row(j))
                    .map(|(q, g)| {
                        let step = rho * g / (counts[j] * q.max(options.phi_precondition_floor));
                        floored_ln(*q) + step.clamp(-options.max_logit_step, options.max_logit_step)
                    })
                    .collect();
                let peak = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                logits.iter_mut().for_each(|z| *z = (*z - peak).exp());
                let total: f64 = logits.iter().sum();
                row.iter_mut().zip(&logits).for_each(|(q, z)| *q = z / total);
            }
        }
        if learn.pi {
            params.pi = params.phi.clone();
        }

        let volume = problem.cache.base_volume;
        if learn.mu {
            let eta_sum: f64 = params.eta.iter().sum();
            for (mu, s) in params.mu.iter_mut().zip(&stats.mu) {
                *mu += rho * (*mu * s / (eta_sum * volume) - *mu);
            }
        }
        if learn.eta {
            // Uses the freshly updated μ so the μ·η scale stays consistent.
            let mu_sum: f64 = params.mu.iter().sum();
            if mu_sum > 0.0 {
                for (eta, s) in params.eta.iter_mut().zip(&stats.eta) {
                    *eta += rho * (*eta * s / (mu_sum * volume) - *eta);
                }
            }
        }
        if learn.a {
            let d = &problem.cache.survival_coeff;
            for ((a, s), d) in params.a.as_mut_slice().iter_mut().zip(stats.a.as_slice()).zip(d.as_slice()) {
                if *d > 0.0 {
                    *a += rho * (*a * s / d - *a);
                }
            }
        }
        if learn.theta && problem.use_category {
            let mut target = Matrix::zeros(params.n_communities(), params.n_categories());
            for e in &trace.events {
                for (g, q) in params.phi.row(e.user).iter().enumerate() {
                    target[(g, e.category)] += q;
                }
            }
            for g in 0..target.rows() {
                for (c, t) in target.row_mut(g).iter_mut().enumerate() {
                    *t = (*t + hyper.theta0[c] - 1.0).max(0.0);
                }
            }
            target.normalize_rows();
            for (theta, t) in params.theta.as_mut_slice().iter_mut().zip(target.as_slice()) {
                *theta += rho * (t - *theta);
            }
            params.theta.normalize_rows();
        }
        check_finite("mu", &params.mu, epoch)?;
        check_finite("eta", &params.eta, epoch)?;
        check_finite("A", params.a.as_slice(), epoch)?;
        check_finite("phi", params.phi.as_slice(), epoch)?;
        params.validate()?;

        if options.early_stop && has_converged(&elbo_trace, options.convergence_window, options.convergence_tol) {
            break;
        }
    }

    let final_set = AssignmentSet::sample(trace, &params.phi, hyper.n_samples, hyper.seed, 0)?;
    let final_elbo = problem.elbo(&params, &final_set);
    Ok(FitReport {
        converged: has_converged(&elbo_trace, options.convergence_window, options.convergence_tol),
        elbo_trace,
        final_elbo,
        params,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}
