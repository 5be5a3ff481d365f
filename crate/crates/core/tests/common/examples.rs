//! Hand-computed examples for the metrics, assignment and spanning-forest
//! operations, each as `(name, computed, expected)`.

use geocomm_core::matrix::Matrix;
use geocomm_core::metrics::{assign_event_community, category_loss, location_loss, rel_err, Assignments, EmbeddingTable};
use geocomm_core::model::{Event, HyperParams, ModelParams, Point, Region, Trace, Venue};
use geocomm_core::network::{mwsf, Edge, InfluenceGraph};

/// Trace with one event per entry of `points`, categories given per event.
pub fn point_trace(points: &[(f64, f64)], categories: &[usize], labels: &[&str]) -> Trace {
    let venues: Vec<Venue> = points
        .iter()
        .zip(categories)
        .enumerate()
        .map(|(id, (&(x, y), &c))| Venue { id, coords: Point::new(x, y), category: c })
        .collect();
    let events = venues
        .iter()
        .map(|v| Event { t: v.id as f64, venue: v.id, user: 0, category: v.category, community: None })
        .collect();
    Trace {
        events,
        venues,
        region: Region::new(points.len() as f64, -5.0, 5.0, -5.0, 5.0).unwrap(),
        n_users: 1,
        n_categories: labels.len(),
        category_labels: labels.iter().map(|s| s.to_string()).collect(),
    }
}

fn edge_set(edges: &[Edge]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = edges.iter().map(|e| (e.src.min(e.dst), e.src.max(e.dst))).collect();
    out.sort_unstable();
    out
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn metric_examples() -> Vec<(&'static str, f64, f64)> {
    let mut out = Vec::new();

    let truth = Matrix::from_rows(&[vec![1.0, 2.0], vec![4.0, 5.0]]).unwrap();
    let est = Matrix::from_rows(&[vec![1.1, 1.8], vec![4.0, 5.0]]).unwrap();
    out.push(("rel_err of identical matrices", rel_err(&truth, &truth).unwrap(), 0.0));
    out.push(("rel_err hand example", rel_err(&truth, &est).unwrap(), 0.05));

    let embeddings = EmbeddingTable::new([
        ("a".to_string(), vec![1.0, 0.0]),
        ("b".to_string(), vec![0.0, 3.0]),
    ])
    .unwrap();
    let same = point_trace(&[(0.0, 0.0); 3], &[0, 0, 0], &["a", "b"]);
    let loss = category_loss(&Assignments::Hard(vec![0; 3]), &same, &embeddings, 1, 1).unwrap();
    out.push(("category loss with every vector at its mean", loss.mean, 0.0));
    let mixed = point_trace(&[(0.0, 0.0); 4], &[0, 0, 0, 1], &["a", "b"]);
    let loss = category_loss(&Assignments::Hard(vec![0; 4]), &mixed, &embeddings, 1, 1).unwrap();
    out.push(("category loss of one orthogonal event (sum)", loss.sum, 1.0));
    out.push(("category loss of one orthogonal event (mean)", loss.mean, 0.25));

    let stacked = point_trace(&[(0.3, -0.2); 3], &[0, 0, 0], &["a"]);
    out.push(("location loss of a single point", location_loss(&Assignments::Hard(vec![0; 3]), &stacked, 1).unwrap(), 0.0));
    let pair = point_trace(&[(0.0, 0.0), (2.0, 0.0)], &[0, 0], &["a"]);
    out.push(("location loss of two points", location_loss(&Assignments::Hard(vec![0; 2]), &pair, 1).unwrap(), 1.0));

    let labels: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
    let triangle = InfluenceGraph::from_edges(
        labels.clone(),
        vec![
            Edge { src: 0, dst: 1, weight: 0.95 },
            Edge { src: 0, dst: 2, weight: 0.92 },
            Edge { src: 1, dst: 2, weight: 0.80 },
        ],
    )
    .unwrap();
    out.push(("forest at 0.9 is {AB, AC}", flag(edge_set(&mwsf(&triangle, 0.9).unwrap()) == vec![(0, 1), (0, 2)]), 1.0));
    out.push(("forest at 1.0 is empty", mwsf(&triangle, 1.0).unwrap().len() as f64, 0.0));
    let tree = InfluenceGraph::from_edges(
        labels,
        vec![Edge { src: 0, dst: 1, weight: 0.4 }, Edge { src: 2, dst: 1, weight: 0.7 }],
    )
    .unwrap();
    out.push(("forest at 0 of a tree is the tree", flag(edge_set(&mwsf(&tree, 0.0).unwrap()) == vec![(0, 1), (1, 2)]), 1.0));

    let trace = point_trace(&[(0.1, 0.1), (0.2, 0.4)], &[0, 1], &["a", "b"]);
    let hyper = HyperParams::new(1, 2, 1, 0.1);
    let single = ModelParams::uniform(1, 1, 2);
    out.push(("one community assigns 0", assign_event_community(&single, &hyper, &trace, 1).unwrap() as f64, 0.0));
    let hyper3 = HyperParams::new(1, 2, 3, 0.1);
    let mut one_hot = ModelParams::uniform(1, 3, 2);
    one_hot.phi = Matrix::from_rows(&[vec![0.0, 0.0, 1.0]]).unwrap();
    one_hot.theta = Matrix::from_rows(&[vec![0.9, 0.1], vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
    out.push(("one-hot posterior assigns its community", assign_event_community(&one_hot, &hyper3, &trace, 0).unwrap() as f64, 2.0));

    out
}
