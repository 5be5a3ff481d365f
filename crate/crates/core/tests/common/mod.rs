//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use geocomm_core::matrix::Matrix;
use geocomm_core::model::{Event, HyperParams, ModelParams, Point, Region, SpatialKernel, Trace, Venue};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub mod examples;
pub mod oracles;

/// Five-point Gauss-Legendre rule on `[a, b]`.
fn gl5(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let s70 = 70f64.sqrt();
    let r = (10.0f64 / 7.0).sqrt();
    let x1 = (5.0 - 2.0 * r).sqrt() / 3.0;
    let x2 = (5.0 + 2.0 * r).sqrt() / 3.0;
    let w0 = 128.0 / 225.0;
    let w1 = (322.0 + 13.0 * s70) / 900.0;
    let w2 = (322.0 - 13.0 * s70) / 900.0;
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * (w0 * f(c) + w1 * (f(c - h * x1) + f(c + h * x1)) + w2 * (f(c - h * x2) + f(c + h * x2)))
}

/// Adaptive bisection with the five-point rule: an interval is accepted when
/// its estimate agrees with the sum over its halves within `tol`.
pub fn adaptive_gl(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (gl5(f, a, m), gl5(f, m, b));
        if depth == 0 || (l + r - whole).abs() <= tol.max(1e-15 * (l + r).abs()) {
            return l + r;
        }
        rec(f, a, m, l, 0.5 * tol, depth - 1) + rec(f, m, b, r, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    rec(f, a, b, gl5(f, a, b), tol, 30)
}

/// Splits `[a, b]` at `c` when it lies strictly inside.
fn split_at(f: &dyn Fn(f64) -> f64, a: f64, b: f64, c: f64, tol: f64) -> f64 {
    if c > a && c < b {
        adaptive_gl(f, a, c, 0.5 * tol) + adaptive_gl(f, c, b, 0.5 * tol)
    } else {
        adaptive_gl(f, a, b, tol)
    }
}

/// Brute-force Cartesian integral of the kernel centred at `center` over the
/// spatial rectangle of `region`: nested adaptive quadrature in x and y,
/// both split at the centre where the integrand has its cusp.
pub fn brute_rectangle_mass(kind: SpatialKernel, h: f64, center: Point, region: &Region, tol: f64) -> f64 {
    let inner_tol = tol / (region.x_max - region.x_min);
    let inner = |x: f64| {
        let g = |y: f64| kind.eval(Point::new(x, y).distance(center), h);
        split_at(&g, region.y_min, region.y_max, center.y, inner_tol)
    };
    split_at(&inner, region.x_min, region.x_max, center.x, tol)
}

/// Random trace on the unit square with `n` events, times in `(0, t_end)`.
pub fn random_trace(rng: &mut ChaCha8Rng, n: usize, users: usize, venues: usize, categories: usize, t_end: f64) -> Trace {
    let venue_list: Vec<Venue> = (0..venues)
        .map(|id| Venue { id, coords: Point::new(rng.random::<f64>(), rng.random::<f64>()), category: id % categories })
        .collect();
    let mut times: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * t_end).collect();
    times.sort_by(f64::total_cmp);
    let events = times
        .into_iter()
        .map(|t| {
            let venue = rng.random_range(0..venues);
            Event { t, venue, user: rng.random_range(0..users), category: venue_list[venue].category, community: None }
        })
        .collect();
    Trace {
        events,
        venues: venue_list,
        region: Region::new(t_end, 0.0, 1.0, 0.0, 1.0).unwrap(),
        n_users: users,
        n_categories: categories,
        category_labels: (0..categories).map(|c| format!("c{c}")).collect(),
    }
}

fn simplex_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize, floor: f64) -> Matrix {
    let mut m = Matrix::from_fn(rows, cols, |_, _| floor + rng.random::<f64>());
    m.normalize_rows();
    m
}

/// Random interior parameters: every probability bounded away from zero.
pub fn random_params(rng: &mut ChaCha8Rng, users: usize, communities: usize, categories: usize) -> ModelParams {
    ModelParams {
        mu: (0..users).map(|_| 0.2 + rng.random::<f64>()).collect(),
        eta: (0..communities).map(|_| 0.3 + rng.random::<f64>()).collect(),
        a: Matrix::from_fn(users, users, |_, _| 0.1 + rng.random::<f64>()),
        theta: simplex_rows(rng, communities, categories, 0.2),
        pi: simplex_rows(rng, users, communities, 0.2),
        phi: simplex_rows(rng, users, communities, 0.2),
    }
}

pub fn hyper_for(trace: &Trace, communities: usize, h: f64, nu: f64) -> HyperParams {
    let mut hyper = HyperParams::new(trace.n_users, trace.n_categories, communities, h);
    hyper.nu = nu;
    hyper
}

/// Largest absolute entry.
pub fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Worst per-coordinate relative error, each denominator floored at
/// `1e-6 · max|reference|` so exact zeros do not divide by zero.
pub fn worst_relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    let floor = 1e-6 * max_abs(reference).max(f64::MIN_POSITIVE);
    analytic
        .iter()
        .zip(reference)
        .map(|(a, r)| (a - r).abs() / r.abs().max(floor))
        .fold(0.0, f64::max)
}

/// `‖analytic − reference‖∞ / ‖reference‖∞`.
pub fn norm_relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    let diff: Vec<f64> = analytic.iter().zip(reference).map(|(a, r)| a - r).collect();
    max_abs(&diff) / max_abs(reference).max(f64::MIN_POSITIVE)
}
