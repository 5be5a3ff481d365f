//! Recovery error, per-event community assignment and community quality losses.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{HyperParams, Indicators, IntensityModel, ModelParams, Point, Trace};

/// Entries of the reference below this magnitude are left out of [`rel_err`].
pub const REL_ERR_EXCLUDE: f64 = 1e-9;

/// Mean of `|a - â| / |a|` over entries with `|a| ≥ 1e-9`.
pub fn rel_err(truth: &Matrix, estimate: &Matrix) -> Result<f64> {
    if truth.shape() != estimate.shape() {
        return Err(Error::domain(format!(
            "shape mismatch {:?} vs {:?}",
            truth.shape(),
            estimate.shape()
        )));
    }
    let mut total = 0.0;
    let mut included = 0usize;
    for (a, b) in truth.as_slice().iter().zip(estimate.as_slice()) {
        if a.abs() >= REL_ERR_EXCLUDE {
            total += (a - b).abs() / a.abs();
            included += 1;
        }
    }
    if included == 0 {
        return Err(Error::domain("every reference entry is below the exclusion threshold"));
    }
    Ok(total / included as f64)
}

/// Unnormalised responsibilities `φ[i_n][m]·θ[m][c_n]·λ̃_{i_n,m}(t_n, ℓ_n)`,
/// with the excitation using expected history indicators. The θ factor is
/// skipped when `use_category` is false.
pub fn event_responsibilities(model: &IntensityModel<'_>, trace: &Trace, n: usize, use_category: bool) -> Result<Vec<f64>> {
    let e = trace.events.get(n).ok_or(Error::IndexOutOfRange {
        what: "event",
        index: n,
        bound: trace.len(),
    })?;
    let params = model.params();
    let lambda = model.per_community(&trace.events, Indicators::Expected, e.user, e.t, trace.coords_of(e))?;
    Ok(lambda
        .iter()
        .enumerate()
        .map(|(m, l)| {
            let theta = if use_category { params.theta[(m, e.category)] } else { 1.0 };
            params.phi[(e.user, m)] * theta * l
        })
        .collect())
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (m, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = m;
        }
    }
    best
}

/// Community of event `n`: the responsibility argmax, ties to the lowest index.
pub fn assign_event_community(params: &ModelParams, hyper: &HyperParams, trace: &Trace, n: usize) -> Result<usize> {
    let model = IntensityModel::new(params, hyper, &trace.venues)?;
    Ok(argmax_lowest(&event_responsibilities(&model, trace, n, true)?))
}

/// Per-event community weights Φ(E_n, g).
#[derive(Debug, Clone, PartialEq)]
pub enum Assignments {
    Hard(Vec<usize>),
    /// Rows sum to one.
    Soft(Matrix),
}

impl Assignments {
    pub fn len(&self) -> usize {
        match self {
            Assignments::Hard(v) => v.len(),
            Assignments::Soft(m) => m.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(g, Φ(E_n, g))` pairs with positive weight.
    fn weights(&self, n: usize) -> Vec<(usize, f64)> {
        match self {
            Assignments::Hard(v) => vec![(v[n], 1.0)],
            Assignments::Soft(m) => m.row(n).iter().copied().enumerate().filter(|(_, w)| *w > 0.0).collect(),
        }
    }

    pub fn hard_labels(&self) -> Vec<usize> {
        match self {
            Assignments::Hard(v) => v.clone(),
            Assignments::Soft(m) => m.iter_rows().map(argmax_lowest).collect(),
        }
    }
}

/// Assigns every event; `soft` returns normalised responsibilities instead of the argmax.
pub fn assign_all(params: &ModelParams, hyper: &HyperParams, trace: &Trace, use_category: bool, soft: bool) -> Result<Assignments> {
    let model = IntensityModel::new(params, hyper, &trace.venues)?;
    let rows = (0..trace.len())
        .into_par_iter()
        .map(|n| event_responsibilities(&model, trace, n, use_category))
        .collect::<Result<Vec<_>>>()?;
    if !soft {
        return Ok(Assignments::Hard(rows.iter().map(|r| argmax_lowest(r)).collect()));
    }
    let m = params.n_communities();
    let mut out = Matrix::zeros(rows.len(), m);
    for (n, r) in rows.iter().enumerate() {
        let total: f64 = r.iter().sum();
        for g in 0..m {
            out[(n, g)] = if total > 0.0 { r[g] / total } else { 1.0 / m as f64 };
        }
    }
    Ok(Assignments::Soft(out))
}

/// Category label to embedding vector, all of one dimension and non-zero norm.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut table = EmbeddingTable::default();
        for (label, v) in entries {
            table.insert(label, v)?;
        }
        Ok(table)
    }

    fn insert(&mut self, label: String, v: Vec<f64>) -> Result<()> {
        if self.vectors.is_empty() {
            self.dim = v.len();
        }
        if v.is_empty() || v.len() != self.dim {
            return Err(Error::domain(format!("embedding for {label:?} has dimension {}, expected {}", v.len(), self.dim)));
        }
        if !(norm(&v) > 0.0) {
            return Err(Error::domain(format!("embedding for {label:?} has zero or invalid norm")));
        }
        self.vectors.insert(label, v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&[f64]> {
        self.vectors.get(label).map(Vec::as_slice)
    }

    /// Parses `label v_1 ... v_D` lines. Labels may contain spaces; the last
    /// `D` tokens are the vector, with `D` fixed by the first entry (or by a
    /// leading `count dim` header line).
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut table = EmbeddingTable::default();
        let mut dim: Option<usize> = None;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx as u64 + 1;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { path: path.to_path_buf(), line: line_no, message };
            if idx == 0 && tokens.len() == 2 && tokens.iter().all(|t| t.parse::<usize>().is_ok()) {
                dim = Some(tokens[1].parse().expect("checked"));
                continue;
            }
            let d = match dim {
                Some(d) => d,
                None => {
                    let numeric = tokens.iter().rev().take_while(|t| t.parse::<f64>().is_ok()).count();
                    let d = numeric.min(tokens.len() - 1);
                    if d == 0 {
                        return Err(parse_err("no vector components".into()));
                    }
                    dim = Some(d);
                    d
                }
            };
            if tokens.len() <= d {
                return Err(parse_err(format!("expected a label and {d} components")));
            }
            let split = tokens.len() - d;
            let label = tokens[..split].join(" ");
            let v = tokens[split..]
                .iter()
                .map(|t| t.parse::<f64>().map_err(|e| parse_err(format!("bad component {t:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            table.insert(label, v).map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (norm(a) * norm(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryLoss {
    pub k_cat: usize,
    /// Loss divided by the number of scored events.
    pub mean: f64,
    pub sum: f64,
    /// Events whose category has no embedding.
    pub dropped: usize,
    /// Top category labels per community.
    pub top_categories: Vec<Vec<String>>,
}

/// Cosine-distance loss of each event's category to its community's mean
/// embedding of the `k_cat` most frequent categories (frequency ties broken by
/// label). The mean is taken over unit vectors so that rescaling an embedding
/// leaves the loss unchanged.
pub fn category_loss(
    assignments: &Assignments,
    trace: &Trace,
    embeddings: &EmbeddingTable,
    k_cat: usize,
    n_communities: usize,
) -> Result<CategoryLoss> {
    if assignments.len() != trace.len() {
        return Err(Error::domain("one assignment per event is required"));
    }
    let label = |c: usize| trace.category_labels[c].as_str();
    let mut freq = vec![vec![0.0; trace.n_categories]; n_communities];
    let mut dropped = 0;
    for (n, e) in trace.events.iter().enumerate() {
        if embeddings.get(label(e.category)).is_none() {
            dropped += 1;
            continue;
        }
        for (g, w) in assignments.weights(n) {
            if g >= n_communities {
                return Err(Error::IndexOutOfRange { what: "community", index: g, bound: n_communities });
            }
            freq[g][e.category] += w;
        }
    }
    if dropped > 0 {
        log::warn!("{dropped} events have categories without embeddings and are skipped");
    }
    let mut top_categories = Vec::with_capacity(n_communities);
    let mut means: Vec<Option<Vec<f64>>> = Vec::with_capacity(n_communities);
    for counts in &freq {
        let mut order: Vec<usize> = (0..trace.n_categories).filter(|&c| counts[c] > 0.0).collect();
        order.sort_by(|&a, &b| counts[b].total_cmp(&counts[a]).then_with(|| label(a).cmp(label(b))));
        order.truncate(k_cat);
        if order.is_empty() {
            means.push(None);
        } else {
            let mut mean = vec![0.0; embeddings.dim()];
            for &c in &order {
                let v = embeddings.get(label(c)).expect("filtered");
                let scale = norm(v) * order.len() as f64;
                for (m, x) in mean.iter_mut().zip(v) {
                    *m += x / scale;
                }
            }
            means.push(Some(mean));
        }
        top_categories.push(order.iter().map(|&c| label(c).to_string()).collect());
    }
    let mut sum = 0.0;
    let mut scored = 0usize;
    for (n, e) in trace.events.iter().enumerate() {
        let Some(v) = embeddings.get(label(e.category)) else { continue };
        scored += 1;
        for (g, w) in assignments.weights(n) {
            if let Some(mean) = &means[g] {
                sum += (1.0 - cosine(v, mean)) * w;
            }
        }
    }
    let mean = if scored > 0 { sum / scored as f64 } else { 0.0 };
    Ok(CategoryLoss { k_cat, mean, sum, dropped, top_categories })
}

/// Within-community sum of squared distances to the community centroid,
/// divided by the number of events.
pub fn location_loss(assignments: &Assignments, trace: &Trace, n_communities: usize) -> Result<f64> {
    if assignments.len() != trace.len() {
        return Err(Error::domain("one assignment per event is required"));
    }
    if trace.is_empty() {
        return Ok(0.0);
    }
    let mut mass = vec![0.0; n_communities];
    let mut sx = vec![0.0; n_communities];
    let mut sy = vec![0.0; n_communities];
    for (n, e) in trace.events.iter().enumerate() {
        let p = trace.coords_of(e);
        for (g, w) in assignments.weights(n) {
            if g >= n_communities {
                return Err(Error::IndexOutOfRange { what: "community", index: g, bound: n_communities });
            }
            mass[g] += w;
            sx[g] += w * p.x;
            sy[g] += w * p.y;
        }
    }
    let centroids: Vec<Point> = (0..n_communities)
        .map(|g| if mass[g] > 0.0 { Point::new(sx[g] / mass[g], sy[g] / mass[g]) } else { Point::new(0.0, 0.0) })
        .collect();
    let mut wcss = 0.0;
    for (n, e) in trace.events.iter().enumerate() {
        let p = trace.coords_of(e);
        for (g, w) in assignments.weights(n) {
            wcss += w * p.distance_sq(centroids[g]);
        }
    }
    Ok(wcss / trace.len() as f64)
}

/// Metric bundle for a set of communities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityReport {
    pub category_loss: Vec<CategoryLoss>,
    pub location_loss: f64,
    /// Events per community (soft weights summed).
    pub community_sizes: Vec<f64>,
}

pub fn community_report(
    assignments: &Assignments,
    trace: &Trace,
    embeddings: &EmbeddingTable,
    k_cats: &[usize],
    n_communities: usize,
) -> Result<CommunityReport> {
    let category_loss = k_cats
        .iter()
        .map(|&k| category_loss(assignments, trace, embeddings, k, n_communities))
        .collect::<Result<Vec<_>>>()?;
    let mut community_sizes = vec![0.0; n_communities];
    for n in 0..assignments.len() {
        for (g, w) in assignments.weights(n) {
            community_sizes[g] += w;
        }
    }
    Ok(CommunityReport {
        category_loss,
        location_loss: location_loss(assignments, trace, n_communities)?,
        community_sizes,
    })
}
