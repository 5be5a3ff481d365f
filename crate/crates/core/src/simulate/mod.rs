//! Synthetic trace generation by thinning, with every accepted location
//! snapped to a discrete venue of the sampled category.

pub mod benchmark;
pub mod config;
pub mod init;
pub mod thinning;

pub use benchmark::*;
pub use config::{CommunitySampling, InfluenceInit, InitScheme, PiInit, Proposal, SimConfig, ThetaInit, VenueLayout};
pub use init::{build_venues, dirichlet, init_params};
pub use thinning::{
    categorical, generate_trace, generate_with, sample_community_and_category, sample_event_time_location,
    sample_user, sim_hyper, snap_to_category, snap_to_venue, Candidate, SimOutput, SimState, ThinningStats,
};
