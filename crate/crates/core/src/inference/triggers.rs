//! Parameter-free quantities of a trace that every likelihood evaluation reuses:
//! each event's candidate parents with their kernel weights, and the
//! per-pair survival coefficients.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{temporal_mass, HyperParams, ModelParams, Trace};
use crate::quadrature::{rectangle_mass, GaussLegendre};

#[derive(Debug, Clone)]
pub struct TriggerCache {
    /// CSR offsets into `parents`, one slot per event plus a sentinel.
    offsets: Vec<usize>,
    /// `(k, w_nk)` with `w_nk = exp(-ν(t_n - t_k))·k_h(‖ℓ_n - ℓ_k‖)`, `h` of the
    /// influenced user, for every `k` with `t_k < t_n` inside the decay cutoff.
    parents: Vec<(u32, f64)>,
    /// `D[j][i] = Σ_{k: i_k = j} ∫ exp(-ν(t - t_k)) dt · ∫_R k_{h_i}(ℓ - ℓ_k) dℓ`.
    pub survival_coeff: Matrix,
    /// `T·|R|`.
    pub base_volume: f64,
    /// Event indices per user.
    pub user_events: Vec<Vec<usize>>,
}

impl TriggerCache {
    pub fn build(trace: &Trace, hyper: &HyperParams) -> Result<Self> {
        hyper.validate()?;
        if hyper.n_users() != trace.n_users {
            return Err(Error::domain(format!(
                "{} bandwidths for {} users",
                hyper.n_users(),
                trace.n_users
            )));
        }
        let events = &trace.events;
        let kind = hyper.kernel;
        let per_event: Vec<Vec<(u32, f64)>> = (0..events.len())
            .into_par_iter()
            .map(|n| {
                let e = &events[n];
                let at = trace.coords_of(e);
                let h = hyper.bandwidth[e.user];
                let start = events[..n].partition_point(|p| p.t < e.t);
                let mut out = Vec::new();
                for k in (0..start).rev() {
                    let p = &events[k];
                    let decay = (-hyper.nu * (e.t - p.t)).exp();
                    if decay < hyper.excitation_cutoff || decay == 0.0 {
                        break;
                    }
                    let w = decay * kind.eval(at.distance(trace.coords_of(p)), h);
                    out.push((k as u32, w));
                }
                out.reverse();
                out
            })
            .collect();
        let mut offsets = Vec::with_capacity(events.len() + 1);
        offsets.push(0);
        let mut parents = Vec::with_capacity(per_event.iter().map(Vec::len).sum());
        for list in per_event {
            parents.extend(list);
            offsets.push(parents.len());
        }

        // Rectangle masses for each distinct (venue, bandwidth) pair in use.
        let mut widths: Vec<f64> = Vec::new();
        let width_of_user: Vec<usize> = hyper
            .bandwidth
            .iter()
            .map(|h| match widths.iter().position(|w| w.to_bits() == h.to_bits()) {
                Some(b) => b,
                None => {
                    widths.push(*h);
                    widths.len() - 1
                }
            })
            .collect();
        let rule = GaussLegendre::new(hyper.quadrature_order);
        let visited = trace.visited_venues();
        let pairs: Vec<(usize, usize)> = visited
            .iter()
            .flat_map(|&v| (0..widths.len()).map(move |b| (v, b)))
            .collect();
        let masses: HashMap<(usize, usize), f64> = pairs
            .par_iter()
            .map(|&(v, b)| {
                let m = rectangle_mass(kind, widths[b], trace.venues[v].coords, &trace.region, &rule);
                ((v, b), m)
            })
            .collect();

        let n_users = trace.n_users;
        let t_end = trace.region.t_end;
        let mut by_width = Matrix::zeros(n_users, widths.len());
        let mut user_events = vec![Vec::new(); n_users];
        for (k, e) in events.iter().enumerate() {
            user_events[e.user].push(k);
            let tm = temporal_mass(e.t, t_end, hyper.nu);
            for b in 0..widths.len() {
                by_width[(e.user, b)] += tm * masses[&(e.venue, b)];
            }
        }
        let survival_coeff = Matrix::from_fn(n_users, n_users, |j, i| by_width[(j, width_of_user[i])]);

        Ok(TriggerCache {
            offsets,
            parents,
            survival_coeff,
            base_volume: t_end * trace.region.area(),
            user_events,
        })
    }

    pub fn n_events(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn parents(&self, n: usize) -> &[(u32, f64)] {
        &self.parents[self.offsets[n]..self.offsets[n + 1]]
    }

    pub fn n_parent_links(&self) -> usize {
        self.parents.len()
    }

    /// `Σ_i μ_i Σ_g η_g · T|R| + Σ_{j,i} A_{j,i} D_{j,i}`.
    pub fn survival(&self, params: &ModelParams) -> f64 {
        let mu: f64 = params.mu.iter().sum();
        let eta: f64 = params.eta.iter().sum();
        let excitation: f64 = params
            .a
            .as_slice()
            .iter()
            .zip(self.survival_coeff.as_slice())
            .map(|(a, d)| a * d)
            .sum();
        mu * eta * self.base_volume + excitation
    }
}
