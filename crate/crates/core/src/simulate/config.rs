use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Region, SpatialKernel, Venue, DEFAULT_NU};

/// How the ground-truth community prior π is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PiInit {
    /// Each row is an independent `Dirichlet(alpha·1)` draw.
    Dirichlet { alpha: f64 },
    /// One-hot rows; user `i` belongs to community `i·M / I` (contiguous blocks).
    Blocks,
}

/// How the category distributions θ_g are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaInit {
    /// `Dirichlet(alpha·1)` over all V categories.
    Dirichlet { alpha: f64 },
    /// Community `g` owns the contiguous category block `[g·V/M, (g+1)·V/M)`;
    /// θ_g is `Dirichlet(alpha·1)` on its block and zero elsewhere.
    Disjoint { alpha: f64 },
}

/// Sparsity pattern of the influence matrix before column normalisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InfluenceInit {
    /// Every off-diagonal entry `Uniform(0, 1)`.
    Dense,
    /// Each user is influenced by `per_column` distinct other users, drawn from
    /// its own dominant community when `same_community` holds.
    Sparse { per_column: usize, same_community: bool },
    /// Users of each dominant community form a directed cycle; every user is
    /// influenced by its predecessor with weight 1.
    Ring,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitScheme {
    /// μ_i = `mu_scale · checkins[i]`.
    pub mu_scale: f64,
    /// Target check-in counts N_i; empty means all ones.
    pub checkins: Vec<f64>,
    /// `None` gives uniform η = 1/M.
    pub eta_alpha: Option<f64>,
    pub pi: PiInit,
    pub theta: ThetaInit,
    pub influence: InfluenceInit,
    /// Every column of A sums to this value.
    pub column_sum: f64,
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme {
            mu_scale: 0.01,
            checkins: Vec::new(),
            eta_alpha: Some(1.0),
            pi: PiInit::Dirichlet { alpha: 1.0 },
            theta: ThetaInit::Dirichlet { alpha: 1.0 },
            influence: InfluenceInit::Dense,
            column_sum: 1.0,
        }
    }
}

/// Where the discrete venue set comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VenueLayout {
    Explicit { venues: Vec<Venue> },
    /// `count` venues placed uniformly with uniformly drawn categories.
    Uniform { count: usize },
    /// Each community gets `spots_per_community` hot spots. Every spot holds one
    /// venue per category of the community's block, jittered within
    /// `spot_radius`. Spots are at least `min_spacing` apart and `margin` away
    /// from the region boundary.
    Themed {
        spots_per_community: usize,
        spot_radius: f64,
        min_spacing: f64,
        margin: f64,
    },
}

/// Spatial proposal used by the thinning sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proposal {
    /// Dominating intensity is the current intensity surface frozen at its
    /// value at the proposal start (every term only decays), scaled by the
    /// safety factor. Candidates are drawn from its mixture components. Exact.
    Envelope,
    /// Scalar bound: aggregate intensity with every spatial kernel at its peak,
    /// times the safety factor; candidate locations uniform over the region. Exact
    /// but slow when kernels are narrow relative to the region.
    Uniform,
    /// Candidate location Gaussian around the previous event, scalar bound as in
    /// `Uniform`. `std = None` uses the previous event's user's bandwidth.
    /// Heuristic: the resulting spatial law is not the model's.
    GaussianAroundPrevious { std: Option<f64> },
}

/// Community draw for an accepted event.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommunitySampling {
    /// `g ~ π_i` after user, time and location, as in the generative recipe.
    #[default]
    Prior,
    /// `g ∝ λ_{i,g}(t, ℓ)`.
    IntensityProportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_events: usize,
    pub n_users: usize,
    pub n_communities: usize,
    pub n_categories: usize,
    pub venues: VenueLayout,
    /// Spatial window and time horizon.
    pub region: Region,
    pub nu: f64,
    /// One bandwidth per user, or a single value broadcast to all.
    pub bandwidth: Vec<f64>,
    pub kernel: SpatialKernel,
    pub init: InitScheme,
    pub proposal: Proposal,
    pub community_sampling: CommunitySampling,
    /// Multiplier on the dominating intensity.
    pub bound_safety: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_events: 1000,
            n_users: 10,
            n_communities: 2,
            n_categories: 4,
            venues: VenueLayout::Uniform { count: 50 },
            region: Region {
                t_end: 1e4,
                x_min: 0.0,
                x_max: 1.0,
                y_min: 0.0,
                y_max: 1.0,
            },
            nu: DEFAULT_NU,
            bandwidth: vec![0.01],
            kernel: SpatialKernel::default(),
            init: InitScheme::default(),
            proposal: Proposal::Envelope,
            community_sampling: CommunitySampling::Prior,
            bound_safety: 1.1,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.region.validate()?;
        if self.n_users == 0 || self.n_communities == 0 || self.n_categories == 0 {
            return Err(Error::config("users, communities and categories must be positive"));
        }
        if !(self.nu > 0.0) {
            return Err(Error::config("nu must be positive"));
        }
        if self.bandwidth.len() != 1 && self.bandwidth.len() != self.n_users {
            return Err(Error::config(format!(
                "expected 1 or {} bandwidths, got {}",
                self.n_users,
                self.bandwidth.len()
            )));
        }
        if self.bandwidth.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::config("bandwidths must be positive"));
        }
        if !(self.bound_safety >= 1.0) {
            return Err(Error::config("bound safety factor must be at least 1"));
        }
        if !self.init.checkins.is_empty() && self.init.checkins.len() != self.n_users {
            return Err(Error::config("checkins must list one count per user"));
        }
        if !(self.init.mu_scale >= 0.0) || !(self.init.column_sum >= 0.0) {
            return Err(Error::config("mu_scale and column_sum must be non-negative"));
        }
        if let ThetaInit::Disjoint { .. } = self.init.theta {
            if self.n_categories % self.n_communities != 0 {
                return Err(Error::config("disjoint theta needs V divisible by M"));
            }
        }
        if let VenueLayout::Themed { .. } = self.venues {
            if self.n_categories % self.n_communities != 0 {
                return Err(Error::config("themed venues need V divisible by M"));
            }
        }
        Ok(())
    }

    /// Per-user bandwidths with a single value broadcast.
    pub fn bandwidths(&self) -> Vec<f64> {
        if self.bandwidth.len() == 1 {
            vec![self.bandwidth[0]; self.n_users]
        } else {
            self.bandwidth.clone()
        }
    }
}
