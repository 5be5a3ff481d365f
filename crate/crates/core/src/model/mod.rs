//! Domain types and pure evaluation of kernels, intensities and probability terms.

pub mod bandwidth;
pub mod intensity;
pub mod kernel;
pub mod types;

pub use bandwidth::{global_bandwidth, silverman_bandwidths};
pub use intensity::{community_intensity, total_intensity, Indicators, InfluenceRows, IntensityModel};
pub use kernel::{joint_kernel, spatial_kernel, temporal_kernel, temporal_mass, SpatialKernel};
pub use types::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Floor applied inside every logarithm of a probability or intensity.
pub const PROB_FLOOR: f64 = 1e-12;

/// `log(max(x, PROB_FLOOR))`.
#[inline]
pub fn floored_ln(x: f64) -> f64 {
    x.max(PROB_FLOOR).ln()
}

/// `log θ[g][c]`, floored.
pub fn category_logprob(theta: &Matrix, community: usize, category: usize) -> Result<f64> {
    if community >= theta.rows() {
        return Err(Error::IndexOutOfRange { what: "community", index: community, bound: theta.rows() });
    }
    if category >= theta.cols() {
        return Err(Error::IndexOutOfRange { what: "category", index: category, bound: theta.cols() });
    }
    Ok(floored_ln(theta[(community, category)]))
}
