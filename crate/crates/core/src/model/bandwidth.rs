//! Per-user spatial bandwidths by a two-dimensional Silverman rule:
//! `h = σ̂ · n^(-1/6)`, with `σ̂` the mean of the per-axis sample standard
//! deviations of the user's check-in coordinates.

use crate::model::types::{Point, Trace};

fn silverman(points: &[Point]) -> Option<f64> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    let (mx, my) = (sx / nf, sy / nf);
    let (vx, vy) = points.iter().fold((0.0, 0.0), |(a, b), p| {
        (a + (p.x - mx).powi(2), b + (p.y - my).powi(2))
    });
    let sigma = 0.5 * ((vx / (nf - 1.0)).sqrt() + (vy / (nf - 1.0)).sqrt());
    let h = sigma * nf.powf(-1.0 / 6.0);
    (h > 0.0 && h.is_finite()).then_some(h)
}

/// Global bandwidth over all check-ins, falling back to `fallback` when undefined.
pub fn global_bandwidth(trace: &Trace, fallback: f64) -> f64 {
    let points: Vec<Point> = trace.events.iter().map(|e| trace.coords_of(e)).collect();
    silverman(&points).unwrap_or(fallback)
}

/// Bandwidth per user. Users with fewer than two check-ins (or no spread) get
/// the global bandwidth.
pub fn silverman_bandwidths(trace: &Trace, fallback: f64) -> Vec<f64> {
    let global = global_bandwidth(trace, fallback);
    let mut per_user: Vec<Vec<Point>> = vec![Vec::new(); trace.n_users];
    for e in &trace.events {
        per_user[e.user].push(trace.coords_of(e));
    }
    per_user.iter().map(|pts| silverman(pts).unwrap_or(global)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_bandwidth() {
        // x = (0, 2), y = (0, 0): std_x = sqrt(2), std_y = 0, mean = sqrt(2)/2.
        let h = silverman(&[Point::new(0.0, 0.0), Point::new(2.0, 0.0)]).unwrap();
        let expected = (2f64.sqrt() / 2.0) * 2f64.powf(-1.0 / 6.0);
        assert!((h - expected).abs() < 1e-15);
    }

    #[test]
    fn single_point_has_no_bandwidth() {
        assert!(silverman(&[Point::new(1.0, 1.0)]).is_none());
        assert!(silverman(&[Point::new(1.0, 1.0), Point::new(1.0, 1.0)]).is_none());
    }
}
