//! Weighted sets of joint community assignments over the events of a trace.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Trace;
use crate::rng::stream;
use crate::simulate::categorical;

/// Largest number of joint assignments `enumerate` will produce.
pub const ENUMERATION_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentKind {
    /// Independent draws from q, weight `1/S` each.
    Sampled,
    /// Every joint assignment with weight `q(g)`.
    Exhaustive,
    /// q puts all mass on one assignment.
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct AssignmentSet {
    pub assignments: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
    pub kind: AssignmentKind,
}

/// The unique assignment if every row of φ used by the trace is one-hot.
fn degenerate_assignment(trace: &Trace, phi: &Matrix) -> Option<Vec<usize>> {
    let mut modes = vec![None; phi.rows()];
    for e in &trace.events {
        if modes[e.user].is_none() {
            let row = phi.row(e.user);
            let hot = row.iter().position(|&p| p == 1.0)?;
            if row.iter().enumerate().any(|(m, &p)| m != hot && p != 0.0) {
                return None;
            }
            modes[e.user] = Some(hot);
        }
    }
    trace.events.iter().map(|e| modes[e.user]).collect()
}

impl AssignmentSet {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Index of the first assignment equal to each one.
    pub fn first_occurrences(&self) -> Vec<usize> {
        let mut seen: std::collections::HashMap<&[usize], usize> = std::collections::HashMap::new();
        (0..self.len())
            .map(|s| *seen.entry(self.assignments[s].as_slice()).or_insert(s))
            .collect()
    }

    /// The trace's own community labels with weight one.
    pub fn from_labels(trace: &Trace) -> Result<Self> {
        let labels = trace
            .communities()
            .ok_or_else(|| Error::Contract("every event needs a community label".into()))?;
        Ok(AssignmentSet { assignments: vec![labels], weights: vec![1.0], kind: AssignmentKind::Degenerate })
    }

    /// `samples` independent joint draws `g_n ~ Categorical(φ[i_n])`, stream
    /// `(seed, epoch, s)` for draw `s`. A degenerate q yields its single
    /// assignment with weight one.
    pub fn sample(trace: &Trace, phi: &Matrix, samples: usize, seed: u64, epoch: u64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::config("need at least one sample"));
        }
        if let Some(only) = degenerate_assignment(trace, phi) {
            return Ok(AssignmentSet { assignments: vec![only], weights: vec![1.0], kind: AssignmentKind::Degenerate });
        }
        let assignments = (0..samples)
            .map(|s| {
                let mut rng = stream(seed, &[epoch, s as u64]);
                trace.events.iter().map(|e| categorical(phi.row(e.user), &mut rng)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AssignmentSet { assignments, weights: vec![1.0 / samples as f64; samples], kind: AssignmentKind::Sampled })
    }

    /// All `M^N` joint assignments, weighted by `q(g) = Π_n φ[i_n][g_n]`.
    pub fn enumerate(trace: &Trace, phi: &Matrix, limit: usize) -> Result<Self> {
        let m = phi.cols();
        let n = trace.len();
        let total = (0..n).try_fold(1usize, |acc, _| acc.checked_mul(m).filter(|&v| v <= limit));
        let total = total.ok_or_else(|| Error::domain(format!("{m}^{n} assignments exceed the limit {limit}")))?;
        let mut assignments = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut g = vec![0usize; n];
        for _ in 0..total {
            weights.push(trace.events.iter().zip(&g).map(|(e, &gn)| phi[(e.user, gn)]).product());
            assignments.push(g.clone());
            for slot in g.iter_mut() {
                *slot += 1;
                if *slot < m {
                    break;
                }
                *slot = 0;
            }
        }
        Ok(AssignmentSet { assignments, weights, kind: AssignmentKind::Exhaustive })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Event, Point, Region, Venue};

    fn trace(n: usize) -> Trace {
        Trace {
            events: (0..n)
                .map(|k| Event { t: k as f64, venue: 0, user: k % 2, category: 0, community: None })
                .collect(),
            venues: vec![Venue { id: 0, coords: Point::new(0.5, 0.5), category: 0 }],
            region: Region::new(10.0, 0.0, 1.0, 0.0, 1.0).unwrap(),
            n_users: 2,
            n_categories: 1,
            category_labels: vec!["a".into()],
        }
    }

    #[test]
    fn enumeration_weights_sum_to_one() {
        let phi = Matrix::from_rows(&[vec![0.3, 0.7], vec![0.5, 0.5]]).unwrap();
        let set = AssignmentSet::enumerate(&trace(3), &phi, 1024).unwrap();
        assert_eq!(set.len(), 8);
        assert!((set.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(AssignmentSet::enumerate(&trace(11), &phi, 1024).is_err());
    }

    #[test]
    fn one_hot_rows_collapse() {
        let phi = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let set = AssignmentSet::sample(&trace(4), &phi, 10, 0, 0).unwrap();
        assert_eq!(set.kind, AssignmentKind::Degenerate);
        assert_eq!(set.assignments, vec![vec![1, 0, 1, 0]]);
    }

    #[test]
    fn samples_are_reproducible() {
        let phi = Matrix::uniform_rows(2, 3);
        let a = AssignmentSet::sample(&trace(6), &phi, 4, 9, 2).unwrap();
        let b = AssignmentSet::sample(&trace(6), &phi, 4, 9, 2).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.weights, vec![0.25; 4]);
    }
}
