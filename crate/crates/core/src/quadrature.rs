//! Gauss-Legendre quadrature and the mass of a radial kernel over a rectangle.
//!
//! The rectangle integral is split at the kernel centre into four quadrants, each
//! of which is a rectangle with the centre at a corner. Each of those is split
//! along its diagonal into two triangles and integrated in polar coordinates:
//! the radial integral is closed form, leaving a one-dimensional integral along
//! the triangle's far edge. That integrand has features at the scale of the
//! edge's distance from the centre and of the bandwidth, so the edge is cut into
//! geometrically growing panels starting from the smaller of the two, with a
//! Gauss-Legendre rule on each. This stays accurate when the centre sits next to
//! the boundary, where a single angular rule does not.

use std::f64::consts::PI;

use crate::model::{Point, Region, SpatialKernel};

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule on `[-1, 1]`, roots found by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 0..n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                dp = nf * (z * p1 - p2) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }
}

/// `∫₀^a ∫₀^b k(√(x² + y²)) dy dx` for `a, b ≥ 0`.
pub fn corner_mass(kind: SpatialKernel, h: f64, a: f64, b: f64, rule: &GaussLegendre) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    edge_mass(kind, h, a, b, rule) + edge_mass(kind, h, b, a, rule)
}

/// Mass of the triangle with vertices at the centre, `(d, 0)` and `(d, len)`:
/// `∫₀^len R(√(d² + s²))·d/(d² + s²) ds` with `R` the closed-form radial mass.
fn edge_mass(kind: SpatialKernel, h: f64, d: f64, len: f64, rule: &GaussLegendre) -> f64 {
    let f = |s: f64| {
        let r2 = d * d + s * s;
        kind.radial_mass(r2.sqrt(), h) * d / r2
    };
    let mut lo = 0.0;
    let mut hi = d.min(h).max(len * 1e-12).min(len);
    let mut total = 0.0;
    loop {
        total += rule.integrate(lo, hi, f);
        if hi >= len {
            return total;
        }
        lo = hi;
        hi = (2.0 * hi).min(len);
    }
}

fn signed_corner(kind: SpatialKernel, h: f64, u: f64, v: f64, rule: &GaussLegendre) -> f64 {
    let sign = u.signum() * v.signum();
    sign * corner_mass(kind, h, u.abs(), v.abs(), rule)
}

/// Mass of the kernel centred at `center` over the spatial rectangle of `region`.
pub fn rectangle_mass(
    kind: SpatialKernel,
    h: f64,
    center: Point,
    region: &Region,
    rule: &GaussLegendre,
) -> f64 {
    let (x0, x1) = (region.x_min - center.x, region.x_max - center.x);
    let (y0, y1) = (region.y_min - center.y, region.y_max - center.y);
    signed_corner(kind, h, x1, y1, rule) - signed_corner(kind, h, x0, y1, rule)
        - signed_corner(kind, h, x1, y0, rule)
        + signed_corner(kind, h, x0, y0, rule)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(5);
        // Exact up to degree 9.
        let v = rule.integrate(-1.0, 2.0, |x| x.powi(9) - 3.0 * x.powi(4) + 1.0);
        let exact = (2f64.powi(10) - 1.0) / 10.0 - 3.0 * (2f64.powi(5) + 1.0) / 5.0 + 3.0;
        assert!((v - exact).abs() < 1e-10);
        let w: f64 = rule.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn huge_rectangle_recovers_plane_mass() {
        let rule = GaussLegendre::new(32);
        let region = Region::new(1.0, -1e4, 1e4, -1e4, 1e4).unwrap();
        for kind in [SpatialKernel::Printed, SpatialKernel::SquaredExponential] {
            let m = rectangle_mass(kind, 1.0, Point::new(3.0, -2.0), &region, &rule);
            assert!((m - kind.plane_mass(1.0)).abs() < 1e-10, "{kind:?}: {m}");
        }
    }

    #[test]
    fn symmetric_quadrants_sum() {
        let rule = GaussLegendre::new(32);
        let region = Region::new(1.0, -1.0, 1.0, -1.0, 1.0).unwrap();
        let whole = rectangle_mass(SpatialKernel::Printed, 0.7, Point::new(0.0, 0.0), &region, &rule);
        let quarter = corner_mass(SpatialKernel::Printed, 0.7, 1.0, 1.0, &rule);
        assert!((whole - 4.0 * quarter).abs() < 1e-14);
    }

    #[test]
    fn centre_outside_rectangle() {
        let rule = GaussLegendre::new(32);
        let region = Region::new(1.0, 1.0, 2.0, 0.0, 1.0).unwrap();
        let outside = rectangle_mass(SpatialKernel::Printed, 0.5, Point::new(0.0, 0.0), &region, &rule);
        let direct = corner_mass(SpatialKernel::Printed, 0.5, 2.0, 1.0, &rule)
            - corner_mass(SpatialKernel::Printed, 0.5, 1.0, 1.0, &rule);
        assert!(outside > 0.0);
        assert!((outside - direct).abs() < 1e-15);
    }
}
