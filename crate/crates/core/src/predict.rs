//! Next-venue ranking and top-K evaluation.
//!
//! A candidate venue `ℓ` with category `c` is scored for user `i` at time `t` by
//! `ln Σ_g λ_{i,g}(t, ℓ)·θ[g][c]`, with history indicators replaced by their
//! expectations under `φ`. Without the category factor the score reduces to
//! the log of the user's total intensity at `ℓ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Event, HyperParams, IntensityModel, ModelParams, Point, Trace, Venue};

/// Excitation sources active for one `(user, t)` query.
struct Source {
    at: Point,
    /// `A[j][i]·e^{-ν(t - t_k)}`.
    weight: f64,
    /// Source user's `φ` row.
    user: usize,
}

struct Query<'m> {
    params: &'m ModelParams,
    hyper: &'m HyperParams,
    user: usize,
    sources: Vec<Source>,
    use_category: bool,
}

impl<'m> Query<'m> {
    fn new(model: &'m IntensityModel<'m>, history: &[Event], venues: &[Venue], user: usize, t: f64, use_category: bool) -> Result<Self> {
        let params = model.params();
        if user >= params.n_users() {
            return Err(Error::IndexOutOfRange { what: "user", index: user, bound: params.n_users() });
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::domain(format!("query time {t} is invalid")));
        }
        let sources = model
            .window(history, t, false)
            .filter_map(|(_, e, decay)| {
                let a = params.a[(e.user, user)];
                (a > 0.0).then(|| Source { at: venues[e.venue].coords, weight: a * decay, user: e.user })
            })
            .collect();
        Ok(Query { params, hyper: model.hyper(), user, sources, use_category })
    }

    fn score(&self, venue: &Venue, scratch: &mut [f64]) -> f64 {
        let p = self.params;
        let mu = p.mu[self.user];
        for (slot, eta) in scratch.iter_mut().zip(&p.eta) {
            *slot = mu * eta;
        }
        let h = self.hyper.bandwidth[self.user];
        for s in &self.sources {
            let w = s.weight * self.hyper.kernel.eval(venue.coords.distance(s.at), h);
            if w == 0.0 {
                continue;
            }
            for (slot, phi) in scratch.iter_mut().zip(p.phi.row(s.user)) {
                *slot += w * phi;
            }
        }
        let mut total = 0.0;
        for (g, lambda) in scratch.iter().enumerate() {
            total += if self.use_category { lambda * p.theta[(g, venue.category)] } else { *lambda };
        }
        total.ln()
    }
}

fn rank(mut scored: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}

/// Candidate venues `(id, score)` sorted by descending score, ties by venue id.
/// `history` must be sorted by time; only events strictly before `t` count.
#[allow(clippy::too_many_arguments)]
pub fn score_candidates(
    params: &ModelParams,
    hyper: &HyperParams,
    venues: &[Venue],
    history: &[Event],
    user: usize,
    t: f64,
    candidates: &[usize],
    use_category: bool,
) -> Result<Vec<(usize, f64)>> {
    if candidates.is_empty() {
        return Err(Error::domain("empty candidate set"));
    }
    if let Some(&bad) = candidates.iter().find(|&&v| v >= venues.len()) {
        return Err(Error::IndexOutOfRange { what: "venue", index: bad, bound: venues.len() });
    }
    let model = IntensityModel::new(params, hyper, venues)?;
    let query = Query::new(&model, history, venues, user, t, use_category)?;
    let mut scratch = vec![0.0; params.n_communities()];
    Ok(rank(candidates.iter().map(|&v| (v, query.score(&venues[v], &mut scratch))).collect()))
}

/// Top-K outcome over a test trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    /// Cutoffs in ascending order.
    pub ks: Vec<usize>,
    /// True positives at each cutoff.
    pub hits: Vec<usize>,
    pub n_test: usize,
    pub n_candidates: usize,
    /// Per test event, the ranked venue ids truncated at the largest cutoff.
    pub ranked: Vec<Vec<usize>>,
    /// Per test event, whether the true venue is within each cutoff.
    pub hit_flags: Vec<Vec<bool>>,
}

impl PredictionResult {
    pub fn hits_at(&self, k: usize) -> Option<usize> {
        self.ks.iter().position(|&x| x == k).map(|i| self.hits[i])
    }
}

/// Ranks the training venues for every test event. The history of a test event
/// is the whole training trace plus all earlier test events.
pub fn evaluate_topk(
    params: &ModelParams,
    hyper: &HyperParams,
    train: &Trace,
    test: &Trace,
    ks: &[usize],
    use_category: bool,
) -> Result<PredictionResult> {
    let candidates = train.visited_venues();
    if candidates.is_empty() {
        return Err(Error::domain("training trace visits no venues"));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::domain("no cutoffs given"));
    }
    if ks[0] == 0 || *ks.last().expect("non-empty") > candidates.len() {
        return Err(Error::domain(format!(
            "cutoffs must lie in 1..={} (the number of candidate venues)",
            candidates.len()
        )));
    }
    if train.venues.len() != test.venues.len() {
        return Err(Error::domain("train and test traces must share a venue set"));
    }
    let k_max = *ks.last().expect("non-empty");
    let venues = &train.venues;
    let model = IntensityModel::new(params, hyper, venues)?;
    let mut history = train.events.clone();
    history.extend(test.events.iter().cloned());
    let offset = train.len();
    let per_event = (0..test.len())
        .into_par_iter()
        .map(|j| {
            let e = &test.events[j];
            let query = Query::new(&model, &history[..offset + j], venues, e.user, e.t, use_category)?;
            let mut scratch = vec![0.0; params.n_communities()];
            let ranked = rank(candidates.iter().map(|&v| (v, query.score(&venues[v], &mut scratch))).collect());
            let position = ranked.iter().position(|&(v, _)| v == e.venue);
            let flags = ks.iter().map(|&k| position.is_some_and(|p| p < k)).collect::<Vec<_>>();
            let top = ranked.into_iter().take(k_max).map(|(v, _)| v).collect::<Vec<_>>();
            Ok((top, flags))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut hits = vec![0; ks.len()];
    let mut ranked = Vec::with_capacity(per_event.len());
    let mut hit_flags = Vec::with_capacity(per_event.len());
    for (top, flags) in per_event {
        for (h, &f) in hits.iter_mut().zip(&flags) {
            *h += usize::from(f);
        }
        ranked.push(top);
        hit_flags.push(flags);
    }
    Ok(PredictionResult { ks, hits, n_test: test.len(), n_candidates: candidates.len(), ranked, hit_flags })
}
