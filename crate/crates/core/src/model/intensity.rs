//! Conditional intensities of the community-indexed spatio-temporal Hawkes process.
//!
//! For user `i`, community `g`, time `t` and location `ℓ`:
//!
//! ```text
//! λ_{i,g}(t, ℓ) = μ_i·η_g + Σ_{t_k < t} A[i_k][i] · exp(-ν(t - t_k)) · k_h(‖ℓ - ℓ_k‖) · 1(g_k = g)
//! λ_i(t, ℓ)     = Σ_g λ_{i,g}(t, ℓ)
//! ```
//!
//! The bandwidth `h` is the influenced user's.

use crate::error::{Error, Result};
use crate::model::types::{Event, HyperParams, ModelParams, Point, Trace, Venue};

/// Where the history's community indicators come from.
#[derive(Debug, Clone, Copy)]
pub enum Indicators<'a> {
    /// Each event's own `community` label.
    Labels,
    /// An assignment vector indexed like the history.
    Assignment(&'a [usize]),
    /// Expected indicators `E_q[1(g_k = g)] = φ[i_k][g]`.
    Expected,
}

/// Non-zero entries of each row of the influence matrix: `rows[j] = [(i, A[j][i])]`.
#[derive(Debug, Clone, Default)]
pub struct InfluenceRows(pub Vec<Vec<(usize, f64)>>);

impl InfluenceRows {
    pub fn from_params(params: &ModelParams) -> Self {
        let rows = params
            .a
            .iter_rows()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &v)| v > 0.0)
                    .map(|(i, &v)| (i, v))
                    .collect()
            })
            .collect();
        InfluenceRows(rows)
    }
}

pub struct IntensityModel<'a> {
    params: &'a ModelParams,
    hyper: &'a HyperParams,
    venues: &'a [Venue],
    rows: InfluenceRows,
    eta_sum: f64,
}

impl<'a> IntensityModel<'a> {
    pub fn new(params: &'a ModelParams, hyper: &'a HyperParams, venues: &'a [Venue]) -> Result<Self> {
        if hyper.bandwidth.len() != params.n_users() {
            return Err(Error::domain(format!(
                "{} bandwidths for {} users",
                hyper.bandwidth.len(),
                params.n_users()
            )));
        }
        if hyper.n_communities != params.n_communities() {
            return Err(Error::domain("community count differs between hyper and model parameters"));
        }
        Ok(IntensityModel {
            params,
            hyper,
            venues,
            rows: InfluenceRows::from_params(params),
            eta_sum: params.eta.iter().sum(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        self.params
    }

    pub fn hyper(&self) -> &HyperParams {
        self.hyper
    }

    pub fn rows(&self) -> &InfluenceRows {
        &self.rows
    }

    /// `Σ_i μ_i·Σ_g η_g`, summed in the same order as [`Self::user_totals`].
    pub fn base_total(&self) -> f64 {
        self.params.mu.iter().map(|mu| mu * self.eta_sum).sum()
    }

    fn check_user(&self, user: usize) -> Result<()> {
        if user >= self.params.n_users() {
            return Err(Error::IndexOutOfRange {
                what: "user",
                index: user,
                bound: self.params.n_users(),
            });
        }
        Ok(())
    }

    fn check_time(t: f64) -> Result<()> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("intensity evaluated at invalid time {t}")));
        }
        Ok(())
    }

    /// History events strictly before `t` (or at/before when `inclusive`) whose
    /// temporal factor is above the cutoff, newest first, with that factor.
    pub(crate) fn window<'h>(
        &self,
        history: &'h [Event],
        t: f64,
        inclusive: bool,
    ) -> impl Iterator<Item = (usize, &'h Event, f64)> + 'h {
        let end = if inclusive {
            history.partition_point(|e| e.t <= t)
        } else {
            history.partition_point(|e| e.t < t)
        };
        let nu = self.hyper.nu;
        let cutoff = self.hyper.excitation_cutoff;
        history[..end]
            .iter()
            .enumerate()
            .rev()
            .map(move |(k, e)| (k, e, (-nu * (t - e.t)).exp()))
            .take_while(move |&(_, _, decay)| decay >= cutoff && decay > 0.0)
    }

    /// Excitation weight of history event `e` on `user` at `(t, at)` given its decay factor.
    #[inline]
    fn excitation(&self, e: &Event, decay: f64, user: usize, at: Point) -> f64 {
        let a = self.params.a[(e.user, user)];
        if a == 0.0 {
            return 0.0;
        }
        let d = at.distance(self.venues[e.venue].coords);
        a * decay * self.hyper.kernel.eval(d, self.hyper.bandwidth[user])
    }

    /// `λ_{user,g}(t, at)` for every community `g`.
    pub fn per_community(
        &self,
        history: &[Event],
        indicators: Indicators<'_>,
        user: usize,
        t: f64,
        at: Point,
    ) -> Result<Vec<f64>> {
        self.check_user(user)?;
        Self::check_time(t)?;
        let m = self.params.n_communities();
        let mu = self.params.mu[user];
        let mut out: Vec<f64> = self.params.eta.iter().map(|eta| mu * eta).collect();
        for (k, e, decay) in self.window(history, t, false) {
            let w = self.excitation(e, decay, user, at);
            if w == 0.0 {
                continue;
            }
            match indicators {
                Indicators::Labels | Indicators::Assignment(_) => {
                    let g = label_of(indicators, k, e)?;
                    if g >= m {
                        return Err(Error::IndexOutOfRange { what: "community", index: g, bound: m });
                    }
                    out[g] += w;
                }
                Indicators::Expected => {
                    for (slot, phi) in out.iter_mut().zip(self.params.phi.row(e.user)) {
                        *slot += w * phi;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `λ_{user,g}(t, at)`.
    pub fn community(
        &self,
        history: &[Event],
        indicators: Indicators<'_>,
        user: usize,
        community: usize,
        t: f64,
        at: Point,
    ) -> Result<f64> {
        self.check_user(user)?;
        Self::check_time(t)?;
        let m = self.params.n_communities();
        if community >= m {
            return Err(Error::IndexOutOfRange { what: "community", index: community, bound: m });
        }
        let mut value = self.params.mu[user] * self.params.eta[community];
        for (k, e, decay) in self.window(history, t, false) {
            let w = self.excitation(e, decay, user, at);
            if w == 0.0 {
                continue;
            }
            let weight = match indicators {
                Indicators::Expected => self.params.phi[(e.user, community)],
                _ => f64::from(u8::from(label_of(indicators, k, e)? == community)),
            };
            value += w * weight;
        }
        Ok(value)
    }

    /// `λ_user(t, at) = Σ_g λ_{user,g}(t, at)`, summed in community order.
    pub fn total(
        &self,
        history: &[Event],
        indicators: Indicators<'_>,
        user: usize,
        t: f64,
        at: Point,
    ) -> Result<f64> {
        let mut sum = 0.0;
        for g in 0..self.params.n_communities() {
            sum += self.community(history, indicators, user, g, t, at)?;
        }
        Ok(sum)
    }

    /// `λ_i(t, at)` for every user. Indicators are irrelevant here because every
    /// history event belongs to exactly one community.
    pub fn user_totals(&self, history: &[Event], t: f64, at: Point) -> Vec<f64> {
        let mut out: Vec<f64> = self.params.mu.iter().map(|mu| mu * self.eta_sum).collect();
        for (_, e, decay) in self.window(history, t, false) {
            let from = self.venues[e.venue].coords;
            let d = at.distance(from);
            for &(user, a) in &self.rows.0[e.user] {
                out[user] += a * decay * self.hyper.kernel.eval(d, self.hyper.bandwidth[user]);
            }
        }
        out
    }

    /// `Σ_i λ_i(t, at)`.
    pub fn aggregate(&self, history: &[Event], t: f64, at: Point) -> f64 {
        self.user_totals(history, t, at).iter().sum()
    }

    /// `Σ_i λ_i(t⁺, ℓ*)` with every spatial factor at its peak: an upper bound on
    /// the aggregate intensity anywhere in space, valid until the next event
    /// because every term decays in time.
    pub fn peak_bound(&self, history: &[Event], t: f64) -> f64 {
        let mut bound: f64 = self.params.mu.iter().map(|mu| mu * self.eta_sum).sum();
        for (_, e, decay) in self.window(history, t, true) {
            for &(user, a) in &self.rows.0[e.user] {
                bound += a * decay * self.hyper.kernel.peak(self.hyper.bandwidth[user]);
            }
        }
        bound
    }
}

fn label_of(indicators: Indicators<'_>, k: usize, e: &Event) -> Result<usize> {
    match indicators {
        Indicators::Labels => e.community.ok_or_else(|| {
            Error::Contract(format!("history event {k} has no community label and no assignment was supplied"))
        }),
        Indicators::Assignment(assign) => assign.get(k).copied().ok_or_else(|| {
            Error::Contract(format!("assignment vector too short for history event {k}"))
        }),
        Indicators::Expected => unreachable!("expected indicators carry no label"),
    }
}

/// `λ_{user,g}(t, at)` over the events of `trace`, taking history communities from
/// `assignment` when given and from the event labels otherwise.
pub fn community_intensity(
    params: &ModelParams,
    hyper: &HyperParams,
    trace: &Trace,
    user: usize,
    community: usize,
    t: f64,
    at: Point,
    assignment: Option<&[usize]>,
) -> Result<f64> {
    let model = IntensityModel::new(params, hyper, &trace.venues)?;
    let indicators = assignment.map_or(Indicators::Labels, Indicators::Assignment);
    model.community(&trace.events, indicators, user, community, t, at)
}

/// `λ_user(t, at) = Σ_g λ_{user,g}(t, at)`.
pub fn total_intensity(
    params: &ModelParams,
    hyper: &HyperParams,
    trace: &Trace,
    user: usize,
    t: f64,
    at: Point,
    assignment: Option<&[usize]>,
) -> Result<f64> {
    let model = IntensityModel::new(params, hyper, &trace.venues)?;
    let indicators = assignment.map_or(Indicators::Labels, Indicators::Assignment);
    model.total(&trace.events, indicators, user, t, at)
}
