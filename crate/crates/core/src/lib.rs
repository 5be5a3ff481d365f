//! Latent-community marked spatio-temporal Hawkes processes for geo-tagged
//! check-in traces.
//!
//! Each user's check-in intensity is a base rate plus self-exciting
//! contributions from earlier check-ins of influencing users in the same
//! latent community, decaying exponentially in time and radially in space.
//! Categories are drawn from community-specific distributions.
//!
//! * [`model`]: domain types, kernels and intensities.
//! * [`simulate`]: thinning-based trace generation snapped to discrete venues.
//! * [`inference`]: stochastic variational EM with score-function gradients.
//! * [`predict`]: next-venue ranking and top-K evaluation.
//! * [`metrics`]: parameter recovery error and community quality losses.
//! * [`network`]: influence graphs and thresholded maximum spanning forests.
//! * [`io`] and [`pipeline`]: file formats and the end-to-end experiment commands.

pub mod error;
pub mod inference;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod network;
pub mod pipeline;
pub mod predict;
pub mod quadrature;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{Event, HyperParams, ModelParams, Point, Region, SpatialKernel, Trace, Venue};
