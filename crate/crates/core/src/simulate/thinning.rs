use rand::Rng as _;
use rand_distr::{Distribution, Exp, Gamma, Normal};

use crate::error::{Error, Result};
use crate::model::{Event, HyperParams, Indicators, IntensityModel, ModelParams, Point, Region, SpatialKernel, Venue};
use crate::rng::{stream, Rng};
use crate::simulate::config::{CommunitySampling, Proposal, SimConfig};
use crate::model::Trace;
use crate::simulate::init::{build_venues, init_params};

/// Counters kept by the thinning sampler.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ThinningStats {
    pub proposals: u64,
    pub accepted: u64,
    /// Largest acceptance ratio seen; never above 1.
    pub max_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: Trace,
    /// Ground truth, with φ = π.
    pub params: ModelParams,
    pub hyper: HyperParams,
    /// Set when the horizon ran out before `n_events` were generated.
    pub truncated: bool,
    pub stats: ThinningStats,
}

/// Categorical draw proportional to `weights`, by inversion of one uniform.
pub fn categorical(weights: &[f64], rng: &mut Rng) -> Result<usize> {
    let mut total = 0.0;
    for &w in weights {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::domain(format!("invalid categorical weight {w}")));
        }
        total += w;
    }
    if !(total > 0.0) {
        return Err(Error::domain("categorical weights are all zero"));
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return Ok(i);
            }
        }
    }
    Ok(last_positive)
}

/// User of an accepted event, drawn proportionally to the per-user intensities.
pub fn sample_user(intensities: &[f64], rng: &mut Rng) -> Result<usize> {
    categorical(intensities, rng)
}

/// `g ~ π_user`, then `c ~ θ_g`.
pub fn sample_community_and_category(params: &ModelParams, user: usize, rng: &mut Rng) -> Result<(usize, usize)> {
    if user >= params.n_users() {
        return Err(Error::IndexOutOfRange { what: "user", index: user, bound: params.n_users() });
    }
    let g = categorical(params.pi.row(user), rng)?;
    let c = categorical(params.theta.row(g), rng)?;
    Ok((g, c))
}

/// Nearest venue to `proposal`; ties to the lowest id.
pub fn snap_to_venue(proposal: Point, venues: &[Venue]) -> Result<usize> {
    nearest(proposal, venues, venues.iter().map(|v| v.id)).ok_or_else(|| Error::domain("venue set is empty"))
}

fn nearest(proposal: Point, venues: &[Venue], ids: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for id in ids {
        let d = proposal.distance_sq(venues[id].coords);
        match best {
            Some((bd, bid)) if d > bd || (d == bd && id > bid) => {}
            _ => best = Some((d, id)),
        }
    }
    best.map(|(_, id)| id)
}

/// Nearest venue of category `category`, falling back to the global nearest
/// when no venue carries it.
pub fn snap_to_category(proposal: Point, venues: &[Venue], by_category: &[Vec<usize>], category: usize) -> Result<usize> {
    match by_category.get(category).filter(|ids| !ids.is_empty()) {
        Some(ids) => Ok(nearest(proposal, venues, ids.iter().copied()).expect("non-empty")),
        None => snap_to_venue(proposal, venues),
    }
}

/// Offset drawn from the kernel normalised to a density on the plane.
fn kernel_offset(kind: SpatialKernel, h: f64, rng: &mut Rng) -> Point {
    let r = match kind {
        // Radial density ∝ r·exp(-r/(2h)): Gamma(2, 2h).
        SpatialKernel::Printed => Gamma::new(2.0, 2.0 * h).expect("positive bandwidth").sample(rng),
        // Rayleigh(h).
        SpatialKernel::SquaredExponential => h * (-2.0 * (1.0 - rng.random::<f64>()).ln()).sqrt(),
    };
    let angle = std::f64::consts::TAU * rng.random::<f64>();
    Point::new(r * angle.cos(), r * angle.sin())
}

fn uniform_in(region: &Region, rng: &mut Rng) -> Point {
    Point::new(
        region.x_min + region.width() * rng.random::<f64>(),
        region.y_min + region.height() * rng.random::<f64>(),
    )
}

/// Mutable state of one simulation run.
pub struct SimState<'a> {
    pub model: IntensityModel<'a>,
    pub venues: &'a [Venue],
    pub region: Region,
    pub proposal: Proposal,
    pub safety: f64,
    pub history: Vec<Event>,
    /// Time up to which the process has been simulated.
    pub now: f64,
    pub stats: ThinningStats,
}

/// An accepted candidate: time, continuous location and per-user intensities there.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub t: f64,
    pub at: Point,
    pub user_intensities: Vec<f64>,
}

struct Component {
    origin: Point,
    coeff: f64,
    h: f64,
}

impl<'a> SimState<'a> {
    fn check_ratio(&mut self, intensity: f64, bound: f64) -> Result<f64> {
        let ratio = if bound > 0.0 { intensity / bound } else { f64::INFINITY };
        if !(ratio <= 1.0 + 1e-12) {
            return Err(Error::BoundViolated { intensity, bound });
        }
        self.stats.max_ratio = self.stats.max_ratio.max(ratio);
        Ok(ratio)
    }

    fn envelope_components(&self) -> Vec<Component> {
        let hyper = self.model.hyper();
        let mut out = Vec::new();
        for (_, e, decay) in self.model.window(&self.history, self.now, true) {
            let origin = self.venues[e.venue].coords;
            for &(user, a) in &self.model.rows().0[e.user] {
                out.push(Component { origin, coeff: a * decay, h: hyper.bandwidth[user] });
            }
        }
        out
    }
}

/// Advances `state` to the next accepted space-time point, or `None` once the
/// horizon is passed. Every candidate's acceptance ratio is checked to lie in `[0, 1]`.
pub fn sample_event_time_location(state: &mut SimState<'_>, rng: &mut Rng) -> Result<Option<Candidate>> {
    let kind = state.model.hyper().kernel;
    let base = state.model.base_total();
    let area = state.region.area();
    loop {
        let (rate, components, scalar_bound) = match state.proposal {
            Proposal::Envelope => {
                let components = state.envelope_components();
                let mass: f64 = components.iter().map(|c| c.coeff * kind.plane_mass(c.h)).sum();
                (state.safety * (base * area + mass), components, 0.0)
            }
            Proposal::Uniform | Proposal::GaussianAroundPrevious { .. } => {
                let bound = state.safety * state.model.peak_bound(&state.history, state.now);
                (bound * area, Vec::new(), bound)
            }
        };
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::Numerical(format!("thinning rate {rate} is not positive and finite")));
        }
        let t = state.now + Exp::new(rate).expect("positive rate").sample(rng);
        if t > state.region.t_end {
            state.now = state.region.t_end;
            return Ok(None);
        }
        state.now = t;
        state.stats.proposals += 1;

        let (at, bound_at) = match &state.proposal {
            Proposal::Envelope => {
                let mut target = rng.random::<f64>() * rate / state.safety - base * area;
                let mut at = None;
                if target >= 0.0 {
                    for c in &components {
                        target -= c.coeff * kind.plane_mass(c.h);
                        if target < 0.0 {
                            let off = kernel_offset(kind, c.h, rng);
                            at = Some(Point::new(c.origin.x + off.x, c.origin.y + off.y));
                            break;
                        }
                    }
                }
                let at = match at {
                    Some(p) => p,
                    None if target < 0.0 || components.is_empty() => uniform_in(&state.region, rng),
                    // Rounding pushed the draw past the last component.
                    None => {
                        let c = components.last().expect("non-empty");
                        let off = kernel_offset(kind, c.h, rng);
                        Point::new(c.origin.x + off.x, c.origin.y + off.y)
                    }
                };
                let envelope = base
                    + components
                        .iter()
                        .map(|c| c.coeff * kind.eval(at.distance(c.origin), c.h))
                        .sum::<f64>();
                (at, state.safety * envelope)
            }
            Proposal::Uniform => (uniform_in(&state.region, rng), scalar_bound),
            Proposal::GaussianAroundPrevious { std } => {
                let at = match state.history.last() {
                    Some(prev) => {
                        let sigma = std.unwrap_or(state.model.hyper().bandwidth[prev.user]);
                        let origin = state.venues[prev.venue].coords;
                        let normal = Normal::new(0.0, sigma).map_err(|e| Error::config(e.to_string()))?;
                        Point::new(origin.x + normal.sample(rng), origin.y + normal.sample(rng))
                    }
                    None => uniform_in(&state.region, rng),
                };
                (at, scalar_bound)
            }
        };
        if !state.region.contains(at) {
            continue;
        }
        let user_intensities = state.model.user_totals(&state.history, t, at);
        let intensity: f64 = user_intensities.iter().sum();
        let ratio = state.check_ratio(intensity, bound_at)?;
        if rng.random::<f64>() < ratio {
            state.stats.accepted += 1;
            return Ok(Some(Candidate { t, at, user_intensities }));
        }
    }
}

/// Hyperparameters implied by a simulation config.
pub fn sim_hyper(config: &SimConfig) -> HyperParams {
    let mut hyper = HyperParams::new(config.n_users, config.n_categories, config.n_communities, 1.0);
    hyper.nu = config.nu;
    hyper.bandwidth = config.bandwidths();
    hyper.kernel = config.kernel;
    hyper.seed = config.seed;
    hyper
}

/// Simulates with freshly drawn ground-truth parameters and venues.
pub fn generate_trace(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let params = init_params(config, &mut stream(config.seed, &[0]))?;
    let venues = build_venues(config, &mut stream(config.seed, &[1]))?;
    generate_with(config, params, venues)
}

/// Simulates with given ground-truth parameters and venues.
pub fn generate_with(config: &SimConfig, params: ModelParams, venues: Vec<Venue>) -> Result<SimOutput> {
    config.validate()?;
    params.validate()?;
    let hyper = sim_hyper(config);
    let mut by_category = vec![Vec::new(); config.n_categories];
    for v in &venues {
        if v.category >= config.n_categories {
            return Err(Error::IndexOutOfRange { what: "venue category", index: v.category, bound: config.n_categories });
        }
        by_category[v.category].push(v.id);
    }
    let mut rng = stream(config.seed, &[2]);
    let model = IntensityModel::new(&params, &hyper, &venues)?;
    let mut state = SimState {
        model,
        venues: &venues,
        region: config.region,
        proposal: config.proposal.clone(),
        safety: config.bound_safety,
        history: Vec::with_capacity(config.n_events.min(1 << 20)),
        now: 0.0,
        stats: ThinningStats::default(),
    };
    let mut truncated = false;
    while state.history.len() < config.n_events {
        let Some(cand) = sample_event_time_location(&mut state, &mut rng)? else {
            truncated = true;
            log::warn!(
                "horizon {} reached after {} of {} events",
                config.region.t_end,
                state.history.len(),
                config.n_events
            );
            break;
        };
        let user = sample_user(&cand.user_intensities, &mut rng)?;
        let g = match config.community_sampling {
            CommunitySampling::Prior => categorical(params.pi.row(user), &mut rng)?,
            CommunitySampling::IntensityProportional => {
                let per = state.model.per_community(&state.history, Indicators::Labels, user, cand.t, cand.at)?;
                categorical(&per, &mut rng)?
            }
        };
        let c = categorical(params.theta.row(g), &mut rng)?;
        let venue = snap_to_category(cand.at, &venues, &by_category, c)?;
        state.history.push(Event {
            t: cand.t,
            venue,
            user,
            category: venues[venue].category,
            community: Some(g),
        });
    }
    let stats = state.stats;
    let events = state.history;
    // A run stopped by the event count is observed up to its last event.
    let t_end = if truncated { config.region.t_end } else { events.last().map_or(0.0, |e| e.t) };
    let trace = Trace {
        events,
        venues,
        region: Region { t_end, ..config.region },
        n_users: config.n_users,
        n_categories: config.n_categories,
        category_labels: (0..config.n_categories).map(|c| format!("c{c}")).collect(),
    };
    trace.validate()?;
    Ok(SimOutput { trace, params, hyper, truncated, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn two_venues() -> Vec<Venue> {
        vec![
            Venue { id: 0, coords: Point::new(0.0, 0.0), category: 0 },
            Venue { id: 1, coords: Point::new(1.0, 1.0), category: 1 },
        ]
    }

    #[test]
    fn snapping_examples() {
        let venues = two_venues();
        assert_eq!(snap_to_venue(Point::new(0.4, 0.5), &venues).unwrap(), 0);
        assert_eq!(snap_to_venue(Point::new(1.0, 1.0), &venues).unwrap(), 1);
        assert_eq!(snap_to_venue(Point::new(0.5, 0.5), &venues).unwrap(), 0);
        assert!(snap_to_venue(Point::new(0.5, 0.5), &[]).is_err());
        let by_cat = vec![vec![0], vec![1], vec![]];
        assert_eq!(snap_to_category(Point::new(0.1, 0.1), &venues, &by_cat, 1).unwrap(), 1);
        assert_eq!(snap_to_category(Point::new(0.9, 0.9), &venues, &by_cat, 2).unwrap(), 1);
    }

    fn within_3_sigma(count: usize, n: usize, p: f64) -> bool {
        let mean = n as f64 * p;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        (count as f64 - mean).abs() <= 3.0 * sd
    }

    #[test]
    fn user_sampling_frequencies() {
        let mut rng = stream(11, &[]);
        assert!((0..100).all(|_| sample_user(&[0.0, 2.0, 0.0], &mut rng).unwrap() == 1));
        let n = 10_000;
        let half = (0..n).filter(|_| sample_user(&[1.0, 1.0], &mut rng).unwrap() == 0).count();
        assert!(within_3_sigma(half, n, 0.5));
        let quarter = (0..n).filter(|_| sample_user(&[1.0, 3.0], &mut rng).unwrap() == 0).count();
        assert!(within_3_sigma(quarter, n, 0.25));
        assert!(sample_user(&[0.0, 0.0], &mut rng).is_err());
    }

    #[test]
    fn community_and_category_draws() {
        let mut params = ModelParams::uniform(2, 10, 3);
        params.pi = Matrix::from_fn(2, 10, |i, g| if i == 0 { f64::from(u8::from(g == 4)) } else { 0.1 });
        params.theta = Matrix::from_fn(10, 3, |_, c| f64::from(u8::from(c == 2)));
        let mut rng = stream(12, &[]);
        for _ in 0..100 {
            assert_eq!(sample_community_and_category(&params, 0, &mut rng).unwrap(), (4, 2));
        }
        let n = 10_000;
        let mut counts = [0usize; 10];
        for _ in 0..n {
            counts[sample_community_and_category(&params, 1, &mut rng).unwrap().0] += 1;
        }
        assert!(counts.iter().all(|&c| within_3_sigma(c, n, 0.1)));
    }

    fn poisson_config(seed: u64) -> SimConfig {
        SimConfig {
            n_events: usize::MAX,
            n_users: 3,
            n_communities: 2,
            n_categories: 2,
            venues: crate::simulate::VenueLayout::Uniform { count: 5 },
            region: Region::new(20.0, 0.0, 2.0, 0.0, 1.0).unwrap(),
            init: crate::simulate::InitScheme { column_sum: 0.0, mu_scale: 0.25, ..Default::default() },
            seed,
            ..SimConfig::default()
        }
    }

    #[test]
    fn poisson_counts_without_influence() {
        // μ_total = 3·0.25, Ση = 1, T·|R| = 40 → expectation 30.
        let runs = 400;
        let total: usize = (0..runs)
            .map(|s| {
                let out = generate_trace(&poisson_config(s)).unwrap();
                assert!(out.truncated);
                out.trace.len()
            })
            .sum();
        let mean = total as f64 / runs as f64;
        let se = (30.0 / runs as f64).sqrt();
        assert!((mean - 30.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn exact_bound_never_rejects() {
        for proposal in [Proposal::Envelope, Proposal::Uniform] {
            let config = SimConfig { bound_safety: 1.0, proposal, ..poisson_config(3) };
            let out = generate_trace(&config).unwrap();
            assert_eq!(out.stats.proposals, out.stats.accepted);
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let config = SimConfig { n_events: 200, ..SimConfig::default() };
        let a = generate_trace(&config).unwrap();
        let b = generate_trace(&config).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.params, b.params);
        assert_eq!(a.trace.len(), 200);
        assert!(a.stats.max_ratio <= 1.0);
        assert!(a.trace.events.windows(2).all(|w| w[0].t < w[1].t));
        for e in &a.trace.events {
            assert_eq!(e.category, a.trace.venues[e.venue].category);
        }
    }

    #[test]
    fn zero_events_gives_empty_trace() {
        let out = generate_trace(&SimConfig { n_events: 0, ..SimConfig::default() }).unwrap();
        assert!(out.trace.is_empty());
        assert!(!out.truncated);
    }

    #[test]
    fn all_proposals_and_variants_run() {
        for proposal in [Proposal::Envelope, Proposal::Uniform, Proposal::GaussianAroundPrevious { std: None }] {
            for community_sampling in [CommunitySampling::Prior, CommunitySampling::IntensityProportional] {
                let config = SimConfig {
                    n_events: 50,
                    bandwidth: vec![0.05],
                    proposal: proposal.clone(),
                    community_sampling,
                    ..SimConfig::default()
                };
                let out = generate_trace(&config).unwrap();
                assert_eq!(out.trace.len(), 50);
            }
        }
    }
}
