//! Triggering kernels. The excitation kernel factorises into a temporal
//! exponential decay and a radially symmetric spatial kernel.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Spatial kernel family.
///
/// `Printed` is `(1/(2πh))·exp(-d/(2h))` on the unsquared distance. It is not a
/// probability density: its mass over the plane is `4h`. `SquaredExponential`
/// is the normalised isotropic Gaussian `(1/(2πh²))·exp(-d²/(2h²))`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialKernel {
    #[default]
    Printed,
    SquaredExponential,
}

impl SpatialKernel {
    /// Kernel value at distance `d`; no argument checks.
    #[inline]
    pub fn eval(self, d: f64, h: f64) -> f64 {
        match self {
            SpatialKernel::Printed => (-d / (2.0 * h)).exp() / (2.0 * PI * h),
            SpatialKernel::SquaredExponential => (-d * d / (2.0 * h * h)).exp() / (2.0 * PI * h * h),
        }
    }

    /// Kernel value relative to its peak, in `(0, 1]`.
    #[inline]
    pub fn shape(self, d: f64, h: f64) -> f64 {
        match self {
            SpatialKernel::Printed => (-d / (2.0 * h)).exp(),
            SpatialKernel::SquaredExponential => (-d * d / (2.0 * h * h)).exp(),
        }
    }

    /// Value at `d = 0`, the supremum over the plane.
    #[inline]
    pub fn peak(self, h: f64) -> f64 {
        self.eval(0.0, h)
    }

    /// Mass over the whole plane.
    pub fn plane_mass(self, h: f64) -> f64 {
        match self {
            SpatialKernel::Printed => 4.0 * h,
            SpatialKernel::SquaredExponential => 1.0,
        }
    }

    /// `∫₀^R k(r)·r dr`, the mass of a disk of radius `R` divided by `2π`.
    pub fn radial_mass(self, radius: f64, h: f64) -> f64 {
        match self {
            SpatialKernel::Printed => {
                let s = radius / (2.0 * h);
                // 1 - e^{-s}(1 + s)
                let tail = -(-s).exp_m1() - s * (-s).exp();
                2.0 * h / PI * tail
            }
            SpatialKernel::SquaredExponential => {
                -(-radius * radius / (2.0 * h * h)).exp_m1() / (2.0 * PI)
            }
        }
    }

    /// Smallest distance beyond which `shape` drops below `cutoff`.
    pub fn support_radius(self, h: f64, cutoff: f64) -> f64 {
        if cutoff <= 0.0 {
            return f64::INFINITY;
        }
        let log_inv = -cutoff.ln();
        match self {
            SpatialKernel::Printed => 2.0 * h * log_inv,
            SpatialKernel::SquaredExponential => h * (2.0 * log_inv).sqrt(),
        }
    }
}

/// `exp(-nu·dt)`, the temporal triggering kernel.
pub fn temporal_kernel(dt: f64, nu: f64) -> Result<f64> {
    if !(dt >= 0.0) {
        return Err(Error::domain(format!("temporal kernel needs dt >= 0, got {dt}")));
    }
    if !(nu > 0.0) {
        return Err(Error::domain(format!("temporal kernel needs nu > 0, got {nu}")));
    }
    Ok((-nu * dt).exp())
}

/// `∫_{t_k}^{T} exp(-nu·(t - t_k)) dt` for an event at `t_k` observed until `t_end`.
#[inline]
pub fn temporal_mass(t_k: f64, t_end: f64, nu: f64) -> f64 {
    if t_end <= t_k {
        return 0.0;
    }
    -(-nu * (t_end - t_k)).exp_m1() / nu
}

/// The printed spatial kernel `(1/(2πh))·exp(-d/(2h))`.
pub fn spatial_kernel(d: f64, h: f64) -> Result<f64> {
    checked_spatial(SpatialKernel::Printed, d, h)
}

pub fn checked_spatial(kind: SpatialKernel, d: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::domain(format!("spatial kernel needs h > 0, got {h}")));
    }
    if !(d >= 0.0) {
        return Err(Error::domain(format!("spatial kernel needs d >= 0, got {d}")));
    }
    Ok(kind.eval(d, h))
}

/// Joint space-time kernel `κ(dt)·κ(d)`.
pub fn joint_kernel(kind: SpatialKernel, dt: f64, d: f64, nu: f64, h: f64) -> Result<f64> {
    Ok(temporal_kernel(dt, nu)? * checked_spatial(kind, d, h)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn temporal_examples() {
        assert_eq!(temporal_kernel(0.0, 0.01).unwrap(), 1.0);
        assert!(close(temporal_kernel(100.0, 0.01).unwrap(), 0.367879, 1e-6));
        let far = temporal_kernel(1e6, 0.01).unwrap();
        assert!(far >= 0.0 && far < 1e-300);
        assert!(temporal_kernel(-1.0, 0.01).is_err());
    }

    #[test]
    fn spatial_examples() {
        assert!(close(spatial_kernel(0.0, 1.0).unwrap(), 0.159155, 1e-6));
        assert!(close(spatial_kernel(2.0, 1.0).unwrap(), 0.058550, 1e-6));
        assert!(spatial_kernel(0.0, 0.0).is_err());
    }

    #[test]
    fn radial_mass_tends_to_plane_mass() {
        for kind in [SpatialKernel::Printed, SpatialKernel::SquaredExponential] {
            for h in [0.1, 1.0, 3.0] {
                let disk = 2.0 * PI * kind.radial_mass(1e4 * h, h);
                assert!(close(disk, kind.plane_mass(h), 1e-12 * kind.plane_mass(h).max(1.0)));
            }
        }
    }

    #[test]
    fn support_radius_matches_cutoff() {
        for kind in [SpatialKernel::Printed, SpatialKernel::SquaredExponential] {
            let r = kind.support_radius(0.5, 1e-6);
            assert!(close(kind.shape(r, 0.5), 1e-6, 1e-15));
        }
    }

    #[test]
    fn temporal_mass_is_integral_of_kernel() {
        let nu = 0.01;
        // Trapezoid oracle.
        let (tk, te) = (3.0, 250.0);
        let n = 200_000;
        let step = (te - tk) / n as f64;
        let trap: f64 = (0..=n)
            .map(|j| {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                w * (-nu * (j as f64 * step)).exp()
            })
            .sum::<f64>()
            * step;
        assert!(close(temporal_mass(tk, te, nu), trap, 1e-8));
        assert_eq!(temporal_mass(5.0, 5.0, nu), 0.0);
    }
}
