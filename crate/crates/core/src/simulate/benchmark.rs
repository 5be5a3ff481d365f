//! The synthetic benchmark at the scale of the published synthetic dataset:
//! 100 users, 10 communities, 200 categories, 9777 check-ins.
//!
//! Users belong to one community each (ten per community) and are influenced
//! by one predecessor in a within-community cycle. Community `g` owns twenty
//! categories; its venues sit in one hot spot holding one venue per owned
//! category, and its category distribution is a Dirichlet(1.25) draw. The branching ratio `A·(1/ν)·4h` is about 0.8, so most
//! check-ins are triggered and the observed span is roughly 10⁵ time units.

use crate::model::Region;
use crate::simulate::config::{InfluenceInit, InitScheme, PiInit, Proposal, SimConfig, ThetaInit, VenueLayout};

pub const BENCH_USERS: usize = 100;
pub const BENCH_COMMUNITIES: usize = 10;
pub const BENCH_CATEGORIES: usize = 200;
pub const BENCH_EVENTS: usize = 9777;
pub const BENCH_BANDWIDTH: f64 = 0.002;
/// Base rate per user; with the branching ratio this puts the span near 10⁵.
pub const BENCH_MU: f64 = 1.96e-4;

pub fn benchmark_config(seed: u64) -> SimConfig {
    SimConfig {
        n_events: BENCH_EVENTS,
        n_users: BENCH_USERS,
        n_communities: BENCH_COMMUNITIES,
        n_categories: BENCH_CATEGORIES,
        venues: VenueLayout::Themed {
            spots_per_community: 1,
            spot_radius: 5e-4,
            min_spacing: 0.05,
            margin: 0.03,
        },
        region: Region {
            t_end: 1e8,
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        },
        nu: 0.01,
        bandwidth: vec![BENCH_BANDWIDTH],
        init: InitScheme {
            mu_scale: BENCH_MU,
            checkins: Vec::new(),
            eta_alpha: None,
            pi: PiInit::Blocks,
            theta: ThetaInit::Disjoint { alpha: 1.25 },
            influence: InfluenceInit::Ring,
            column_sum: 1.0,
        },
        proposal: Proposal::Envelope,
        seed,
        ..SimConfig::default()
    }
}
