use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::kernel::SpatialKernel;

/// Tolerance for "row sums to one".
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Venue {
    pub id: usize,
    pub coords: Point,
    pub category: usize,
}

/// Observation window: `[0, t_end]` in time and an axis-aligned rectangle in space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub t_end: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn new(t_end: f64, x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let region = Region {
            t_end,
            x_min,
            x_max,
            y_min,
            y_max,
        };
        region.validate()?;
        Ok(region)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.t_end, self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.t_end < 0.0 || self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::domain(format!("degenerate region {self:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }
}

/// One check-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub venue: usize,
    pub user: usize,
    pub category: usize,
    /// Latent community, known only for synthetic ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub community: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub events: Vec<Event>,
    pub venues: Vec<Venue>,
    pub region: Region,
    pub n_users: usize,
    pub n_categories: usize,
    /// Human-readable category names, indexed by category id.
    pub category_labels: Vec<String>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn venue_of(&self, event: &Event) -> &Venue {
        &self.venues[event.venue]
    }

    pub fn coords_of(&self, event: &Event) -> Point {
        self.venues[event.venue].coords
    }

    /// Checks every index bound, venue/category consistency and time ordering.
    pub fn validate(&self) -> Result<()> {
        self.region.validate()?;
        for (id, venue) in self.venues.iter().enumerate() {
            if venue.id != id {
                return Err(Error::domain(format!("venue ids must be dense, found {} at {id}", venue.id)));
            }
            if venue.category >= self.n_categories {
                return Err(Error::IndexOutOfRange {
                    what: "venue category",
                    index: venue.category,
                    bound: self.n_categories,
                });
            }
        }
        if self.category_labels.len() != self.n_categories {
            return Err(Error::domain("category label count differs from n_categories"));
        }
        let mut prev = f64::NEG_INFINITY;
        for event in &self.events {
            if !(event.t >= prev) || !event.t.is_finite() {
                return Err(Error::domain(format!("events not sorted at t = {}", event.t)));
            }
            if event.t < 0.0 || event.t > self.region.t_end {
                return Err(Error::domain(format!("event time {} outside [0, {}]", event.t, self.region.t_end)));
            }
            prev = event.t;
            if event.user >= self.n_users {
                return Err(Error::IndexOutOfRange {
                    what: "user",
                    index: event.user,
                    bound: self.n_users,
                });
            }
            let venue = self.venues.get(event.venue).ok_or(Error::IndexOutOfRange {
                what: "venue",
                index: event.venue,
                bound: self.venues.len(),
            })?;
            if venue.category != event.category {
                return Err(Error::domain(format!(
                    "event category {} differs from venue {} category {}",
                    event.category, venue.id, venue.category
                )));
            }
        }
        Ok(())
    }

    pub fn user_event_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_users];
        for e in &self.events {
            counts[e.user] += 1;
        }
        counts
    }

    /// Ground-truth community labels, if every event carries one.
    pub fn communities(&self) -> Option<Vec<usize>> {
        self.events.iter().map(|e| e.community).collect()
    }

    /// Same venues, users and categories with a different event list.
    pub fn with_events(&self, events: Vec<Event>, t_end: f64) -> Trace {
        Trace {
            events,
            venues: self.venues.clone(),
            region: Region { t_end, ..self.region },
            n_users: self.n_users,
            n_categories: self.n_categories,
            category_labels: self.category_labels.clone(),
        }
    }

    /// Temporal split: the first `fraction` of events (by timestamp) go to training.
    /// The training window closes at the first test event.
    pub fn split_at_fraction(&self, fraction: f64) -> Result<(Trace, Trace)> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::domain(format!("split fraction {fraction} outside [0, 1]")));
        }
        let cut = ((self.events.len() as f64) * fraction).round() as usize;
        let cut = cut.min(self.events.len());
        let boundary = self.events.get(cut).map_or(self.region.t_end, |e| e.t);
        let train = self.with_events(self.events[..cut].to_vec(), boundary);
        let test = self.with_events(self.events[cut..].to_vec(), self.region.t_end);
        Ok((train, test))
    }

    /// Sorted, de-duplicated venue ids visited in this trace.
    pub fn visited_venues(&self) -> Vec<usize> {
        let mut seen = vec![false; self.venues.len()];
        for e in &self.events {
            seen[e.venue] = true;
        }
        (0..self.venues.len()).filter(|&v| seen[v]).collect()
    }
}

/// Optimizer schedule shared by every fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimSettings {
    /// Step size at epoch 1; decays as `1/sqrt(epoch)`.
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for OptimSettings {
    fn default() -> Self {
        OptimSettings {
            learning_rate: 1.0,
            epochs: 200,
        }
    }
}

/// Quantities held fixed during inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Temporal decay.
    pub nu: f64,
    /// Spatial bandwidth per user.
    pub bandwidth: Vec<f64>,
    /// Dirichlet prior over categories.
    pub theta0: Vec<f64>,
    pub n_communities: usize,
    /// Monte-Carlo samples per ELBO estimate.
    pub n_samples: usize,
    #[serde(default)]
    pub kernel: SpatialKernel,
    /// Gauss-Legendre nodes per angular segment of the rectangle integral.
    #[serde(default = "default_quadrature_order")]
    pub quadrature_order: usize,
    /// History events whose temporal factor falls below this are ignored.
    #[serde(default = "default_excitation_cutoff")]
    pub excitation_cutoff: f64,
    #[serde(default)]
    pub optim: OptimSettings,
    #[serde(default)]
    pub seed: u64,
}

fn default_quadrature_order() -> usize {
    32
}

fn default_excitation_cutoff() -> f64 {
    1e-12
}

pub const DEFAULT_NU: f64 = 0.01;
pub const DEFAULT_SAMPLES: usize = 10;

impl HyperParams {
    pub fn new(n_users: usize, n_categories: usize, n_communities: usize, bandwidth: f64) -> Self {
        HyperParams {
            nu: DEFAULT_NU,
            bandwidth: vec![bandwidth; n_users],
            theta0: vec![1.0; n_categories],
            n_communities,
            n_samples: DEFAULT_SAMPLES,
            kernel: SpatialKernel::default(),
            quadrature_order: default_quadrature_order(),
            excitation_cutoff: default_excitation_cutoff(),
            optim: OptimSettings::default(),
            seed: 0,
        }
    }

    pub fn n_users(&self) -> usize {
        self.bandwidth.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::config(format!("nu must be positive, got {}", self.nu)));
        }
        if let Some(h) = self.bandwidth.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::config(format!("bandwidth must be positive, got {h}")));
        }
        if self.theta0.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::config("theta0 entries must be positive"));
        }
        if self.n_communities == 0 {
            return Err(Error::config("need at least one community"));
        }
        if self.n_samples == 0 {
            return Err(Error::config("need at least one Monte-Carlo sample"));
        }
        if self.quadrature_order == 0 {
            return Err(Error::config("quadrature order must be positive"));
        }
        if !(0.0..1.0).contains(&self.excitation_cutoff) {
            return Err(Error::config("excitation cutoff must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Every learnable quantity plus the variational posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Base intensity per user.
    pub mu: Vec<f64>,
    /// Community weights.
    pub eta: Vec<f64>,
    /// Influence, row = influencer, column = influenced.
    pub a: Matrix,
    /// Category distribution per community (M x V).
    pub theta: Matrix,
    /// Community prior per user (I x M).
    pub pi: Matrix,
    /// Variational community posterior per user (I x M).
    pub phi: Matrix,
}

impl ModelParams {
    /// Uninformative parameters: uniform rows, unit base rates, no influence.
    pub fn uniform(n_users: usize, n_communities: usize, n_categories: usize) -> Self {
        ModelParams {
            mu: vec![1.0; n_users],
            eta: vec![1.0 / n_communities as f64; n_communities],
            a: Matrix::zeros(n_users, n_users),
            theta: Matrix::uniform_rows(n_communities, n_categories),
            pi: Matrix::uniform_rows(n_users, n_communities),
            phi: Matrix::uniform_rows(n_users, n_communities),
        }
    }

    pub fn n_users(&self) -> usize {
        self.mu.len()
    }

    pub fn n_communities(&self) -> usize {
        self.eta.len()
    }

    pub fn n_categories(&self) -> usize {
        self.theta.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (i, m, v) = (self.n_users(), self.n_communities(), self.n_categories());
        let shapes = [
            ("a", self.a.shape(), (i, i)),
            ("theta", self.theta.shape(), (m, v)),
            ("pi", self.pi.shape(), (i, m)),
            ("phi", self.phi.shape(), (i, m)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::domain(format!("{name} has shape {got:?}, expected {want:?}")));
            }
        }
        let non_negative = |xs: &[f64]| xs.iter().all(|x| *x >= 0.0 && x.is_finite());
        if !non_negative(&self.mu) || !non_negative(&self.eta) || !non_negative(self.a.as_slice()) {
            return Err(Error::domain("mu, eta and A must be finite and non-negative"));
        }
        for (name, table) in [("theta", &self.theta), ("pi", &self.pi), ("phi", &self.phi)] {
            if !table.is_row_stochastic(SIMPLEX_TOL) {
                return Err(Error::domain(format!("{name} rows are not on the simplex")));
            }
        }
        Ok(())
    }
}
