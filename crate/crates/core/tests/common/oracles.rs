//! Oracle checks shared by the inference tests and the acceptance report. Each
//! returns the worst error it saw so callers choose how to assert or print.

use geocomm_core::inference::{survival_integral, AssignmentSet, Problem, ENUMERATION_LIMIT};
use geocomm_core::model::{Event, HyperParams, ModelParams, Point, Region, SpatialKernel, Trace, Venue};
use geocomm_core::quadrature::{rectangle_mass, GaussLegendre};
use rand::Rng;

use super::{brute_rectangle_mass, norm_relative_error, random_params, random_trace, rng, worst_relative_error};

pub struct Instance {
    pub trace: Trace,
    pub hyper: HyperParams,
    pub params: ModelParams,
}

/// Small instance with `n_events` events, `m` communities, three users and
/// three categories, strong enough excitation that every block matters.
pub fn enumerable_instance(seed: u64, n_events: usize, m: usize) -> Instance {
    let mut r = rng(seed);
    let trace = random_trace(&mut r, n_events, 3, 4, 3, 20.0);
    let mut hyper = HyperParams::new(3, 3, m, 0.3);
    hyper.nu = 0.1;
    hyper.bandwidth = (0..3).map(|_| 0.2 + 0.3 * r.random::<f64>()).collect();
    let params = random_params(&mut r, 3, m, 3);
    Instance { trace, hyper, params }
}

/// `(N, M)` shapes with `Mᴺ ≤ 1024` used by the gradient suite.
pub const GRADIENT_SHAPES: [(usize, usize); 12] =
    [(1, 2), (3, 2), (4, 2), (10, 2), (5, 3), (6, 3), (4, 4), (5, 4), (3, 5), (4, 5), (2, 10), (3, 10)];

/// Shapes on which the Monte-Carlo gradients are compared.
pub const MC_SHAPES: [(usize, usize); 3] = [(4, 2), (5, 3), (3, 4)];

pub fn exact_elbo_value(problem: &Problem<'_>, params: &ModelParams) -> f64 {
    let set = AssignmentSet::enumerate(problem.trace, &params.phi, ENUMERATION_LIMIT).unwrap();
    problem.elbo(params, &set).value
}

/// Five-point central difference of `f` at zero offset.
pub fn derivative(f: impl Fn(f64) -> f64, step: f64) -> f64 {
    (8.0 * (f(step) - f(-step)) - (f(2.0 * step) - f(-2.0 * step))) / (12.0 * step)
}

/// `params` with logit `(j, m)` of φ shifted by `delta`.
pub fn shift_logit(params: &ModelParams, j: usize, m: usize, delta: f64) -> ModelParams {
    let mut p = params.clone();
    let mut logits: Vec<f64> = p.phi.row(j).iter().map(|q| q.ln()).collect();
    logits[m] += delta;
    let peak = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|z| (z - peak).exp()).collect();
    let total: f64 = weights.iter().sum();
    p.phi.row_mut(j).iter_mut().zip(&weights).for_each(|(q, w)| *q = w / total);
    p
}

/// Finite-difference gradient of `value` in every block.
pub struct Gradients {
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    pub a: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

pub fn finite_difference_gradients(params: &ModelParams, value: &dyn Fn(&ModelParams) -> f64) -> Gradients {
    const REL_STEP: f64 = 1e-3;
    let scalar = |get: &dyn Fn(&mut ModelParams) -> &mut f64| {
        let mut base = params.clone();
        let x = *get(&mut base);
        derivative(
            |d| {
                let mut p = params.clone();
                *get(&mut p) = x + d;
                value(&p)
            },
            REL_STEP * x,
        )
    };
    let (n_users, m, v) = (params.n_users(), params.n_communities(), params.n_categories());
    let mu = (0..n_users).map(|i| scalar(&|p| &mut p.mu[i])).collect();
    let eta = (0..m).map(|g| scalar(&|p| &mut p.eta[g])).collect();
    let a = (0..n_users * n_users).map(|k| scalar(&|p| &mut p.a.as_mut_slice()[k])).collect();
    let theta = (0..m * v).map(|k| scalar(&|p| &mut p.theta.as_mut_slice()[k])).collect();
    let phi = (0..n_users * m)
        .map(|k| derivative(|d| value(&shift_logit(params, k / m, k % m, d)), REL_STEP))
        .collect();
    Gradients { mu, eta, a, theta, phi }
}

/// Worst error per block, in the order μ, η, A, θ, φ-logits.
#[derive(Debug, Clone, Copy)]
pub struct BlockErrors(pub [f64; 5]);

impl BlockErrors {
    pub fn worst(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn max(self, other: BlockErrors) -> BlockErrors {
        let mut out = self.0;
        out.iter_mut().zip(other.0).for_each(|(a, b)| *a = a.max(b));
        BlockErrors(out)
    }
}

/// Analytic gradients of the enumerated ELBO against finite differences,
/// worst per-coordinate relative error per block.
pub fn enumerated_gradient_errors(inst: &Instance) -> BlockErrors {
    let problem = Problem::new(&inst.trace, &inst.hyper).unwrap();
    let params = &inst.params;
    let set = AssignmentSet::enumerate(&inst.trace, &params.phi, ENUMERATION_LIMIT).unwrap();
    let analytic = problem.param_gradients(params, &set);
    let phi = problem.phi_gradient(params, &set, false);
    let fd = finite_difference_gradients(params, &|p| exact_elbo_value(&problem, p));
    BlockErrors([
        worst_relative_error(&analytic.mu, &fd.mu),
        worst_relative_error(&analytic.eta, &fd.eta),
        worst_relative_error(analytic.a.as_slice(), &fd.a),
        worst_relative_error(analytic.theta.as_slice(), &fd.theta),
        worst_relative_error(phi.as_slice(), &fd.phi),
    ])
}

/// Monte-Carlo gradients with `samples` draws against finite differences of
/// the enumerated ELBO, norm-relative error per block.
pub fn monte_carlo_gradient_errors(inst: &Instance, samples: usize, seed: u64) -> BlockErrors {
    let problem = Problem::new(&inst.trace, &inst.hyper).unwrap();
    let params = &inst.params;
    let set = AssignmentSet::sample(&inst.trace, &params.phi, samples, seed, 0).unwrap();
    let mc = problem.param_gradients(params, &set);
    let phi = problem.phi_gradient(params, &set, true);
    let fd = finite_difference_gradients(params, &|p| exact_elbo_value(&problem, p));
    BlockErrors([
        norm_relative_error(&mc.mu, &fd.mu),
        norm_relative_error(&mc.eta, &fd.eta),
        norm_relative_error(mc.a.as_slice(), &fd.a),
        norm_relative_error(mc.theta.as_slice(), &fd.theta),
        norm_relative_error(phi.as_slice(), &fd.phi),
    ])
}

/// Random spatial rectangle with corners in `[-1, 1]` and sides at least 0.3.
fn random_region(r: &mut impl Rng, t_end: f64) -> Region {
    let x_min = -1.0 + r.random::<f64>();
    let y_min = -1.0 + r.random::<f64>();
    let x_max = x_min + 0.3 + r.random::<f64>();
    let y_max = y_min + 0.3 + r.random::<f64>();
    Region::new(t_end, x_min, x_max, y_min, y_max).unwrap()
}

fn inside(r: &mut impl Rng, region: &Region) -> Point {
    Point::new(
        region.x_min + r.random::<f64>() * region.width(),
        region.y_min + r.random::<f64>() * region.height(),
    )
}

fn brute_tol(h: f64) -> f64 {
    1e-11 * h
}

/// Relative error of the quadrature rectangle mass against brute 2-D adaptive
/// quadrature, one entry per random configuration. Half of the configurations
/// put the kernel centre on or next to the boundary.
pub fn rectangle_mass_errors(seed: u64, configs: usize) -> Vec<f64> {
    let mut r = rng(seed);
    let rule = GaussLegendre::new(32);
    (0..configs)
        .map(|c| {
            let region = random_region(&mut r, 1.0);
            let h = 0.01 + 0.2 * r.random::<f64>();
            let mut center = inside(&mut r, &region);
            if c % 2 == 1 {
                center.x = region.x_min + 1e-3 * r.random::<f64>();
            }
            let kind = if c % 5 == 4 { SpatialKernel::SquaredExponential } else { SpatialKernel::Printed };
            let quad = rectangle_mass(kind, h, center, &region, &rule);
            let brute = brute_rectangle_mass(kind, h, center, &region, brute_tol(h));
            (quad - brute).abs() / brute
        })
        .collect()
}

/// Relative error of the full survival integral against base volume plus
/// closed-form temporal mass times brute spatial mass, one entry per random
/// trace configuration.
pub fn survival_errors(seed: u64, configs: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..configs)
        .map(|_| {
            let t_end = 5.0 + 50.0 * r.random::<f64>();
            let region = random_region(&mut r, t_end);
            let (n_users, n_venues) = (3, 4);
            let venues: Vec<Venue> =
                (0..n_venues).map(|id| Venue { id, coords: inside(&mut r, &region), category: id % 2 }).collect();
            let n_events = 1 + r.random_range(0..4);
            let mut times: Vec<f64> = (0..n_events).map(|_| r.random::<f64>() * t_end).collect();
            times.sort_by(f64::total_cmp);
            let events: Vec<Event> = times
                .into_iter()
                .map(|t| {
                    let venue = r.random_range(0..n_venues);
                    Event { t, venue, user: r.random_range(0..n_users), category: venues[venue].category, community: None }
                })
                .collect();
            let trace = Trace {
                events,
                venues,
                region,
                n_users,
                n_categories: 2,
                category_labels: vec!["a".into(), "b".into()],
            };
            let mut hyper = HyperParams::new(n_users, 2, 2, 0.1);
            hyper.nu = 0.02 + 0.2 * r.random::<f64>();
            hyper.bandwidth = (0..n_users).map(|_| 0.02 + 0.2 * r.random::<f64>()).collect();
            let params = random_params(&mut r, n_users, 2, 2);
            let got = survival_integral(&params, &hyper, &trace).unwrap();
            let base: f64 = params.mu.iter().sum::<f64>() * params.eta.iter().sum::<f64>() * t_end * region.area();
            let mut expected = base;
            for e in &trace.events {
                let center = trace.coords_of(e);
                for i in 0..n_users {
                    let h = hyper.bandwidth[i];
                    let spatial = brute_rectangle_mass(hyper.kernel, h, center, &region, brute_tol(h));
                    expected += params.a[(e.user, i)] * temporal_mass_oracle(e.t, t_end, hyper.nu) * spatial;
                }
            }
            (got - expected).abs() / expected
        })
        .collect()
}

/// `1 - e^{-ν(T - t)}` over `ν`, written out independently of the library.
pub fn temporal_mass_oracle(t: f64, t_end: f64, nu: f64) -> f64 {
    -(-nu * (t_end - t)).exp_m1() / nu
}
