//! Influence graphs and thresholded maximum weighted spanning forests.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Directed edge `src → dst` (src influences dst).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// Users as nodes and influence weights as directed edges. Self-loops are never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceGraph {
    pub labels: Vec<String>,
    /// Sorted by `(src, dst)`.
    pub edges: Vec<Edge>,
    /// Known social ties, as unordered node pairs.
    #[serde(default)]
    pub social: Vec<(usize, usize)>,
}

impl InfluenceGraph {
    /// Positive off-diagonal entries of `a`, with `a[j][i]` the weight of `j → i`.
    /// Weights are divided by the largest off-diagonal entry so they lie in `[0, 1]`.
    pub fn from_influence(a: &Matrix, labels: Option<Vec<String>>) -> Result<Self> {
        let (rows, cols) = a.shape();
        if rows != cols {
            return Err(Error::domain(format!("influence matrix is {rows}x{cols}, expected square")));
        }
        let mut scale: f64 = 0.0;
        for j in 0..rows {
            for i in 0..cols {
                let w = a[(j, i)];
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(Error::domain(format!("influence entry ({j}, {i}) = {w} is not a finite non-negative number")));
                }
                if i != j {
                    scale = scale.max(w);
                }
            }
        }
        let mut edges = Vec::new();
        if scale > 0.0 {
            for j in 0..rows {
                for i in 0..cols {
                    if i != j && a[(j, i)] > 0.0 {
                        edges.push(Edge { src: j, dst: i, weight: a[(j, i)] / scale });
                    }
                }
            }
        }
        Self::from_edges(labels.unwrap_or_else(|| default_labels(rows)), edges)
    }

    /// Graph over `labels.len()` nodes with the given weights, used as is.
    pub fn from_edges(labels: Vec<String>, mut edges: Vec<Edge>) -> Result<Self> {
        let n = labels.len();
        for e in &edges {
            if e.src >= n || e.dst >= n {
                return Err(Error::IndexOutOfRange { what: "node", index: e.src.max(e.dst), bound: n });
            }
            if !(e.weight >= 0.0 && e.weight.is_finite()) {
                return Err(Error::domain(format!("edge weight {} is not a finite non-negative number", e.weight)));
            }
        }
        edges.retain(|e| e.src != e.dst);
        edges.sort_by(|a, b| (a.src, a.dst).cmp(&(b.src, b.dst)));
        Ok(InfluenceGraph { labels, edges, social: Vec::new() })
    }

    pub fn with_social(mut self, pairs: Vec<(usize, usize)>) -> Self {
        self.social = pairs.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        self.social.sort_unstable();
        self.social.dedup();
        self
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    /// Undirected edges `(a, b, max(w_ab, w_ba))` with `a < b`, sorted by pair.
    pub fn symmetrized(&self) -> Vec<Edge> {
        let mut pairs: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| Edge { src: e.src.min(e.dst), dst: e.src.max(e.dst), weight: e.weight })
            .collect();
        pairs.sort_by(|a, b| (a.src, a.dst).cmp(&(b.src, b.dst)).then(b.weight.total_cmp(&a.weight)));
        pairs.dedup_by(|later, first| later.src == first.src && later.dst == first.dst);
        pairs
    }
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Undirected maximum weighted spanning forest over the symmetrized edges with
/// weight strictly above `threshold`. Kruskal on descending weight, ties by node pair.
/// Edges are returned in the order they were accepted.
pub fn mwsf(graph: &InfluenceGraph, threshold: f64) -> Result<Vec<Edge>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::domain(format!("threshold {threshold} outside [0, 1]")));
    }
    let mut candidates: Vec<Edge> = graph.symmetrized().into_iter().filter(|e| e.weight > threshold).collect();
    candidates.sort_by(|a, b| b.weight.total_cmp(&a.weight).then((a.src, a.dst).cmp(&(b.src, b.dst))));
    let mut sets = UnionFind::new(graph.n_nodes());
    Ok(candidates.into_iter().filter(|e| sets.union(e.src, e.dst)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFormat {
    Csv,
    GraphMl,
}

impl GraphFormat {
    /// `.graphml` selects GraphML; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("graphml") => GraphFormat::GraphMl,
            _ => GraphFormat::Csv,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            GraphFormat::Csv => "csv",
            GraphFormat::GraphMl => "graphml",
        }
    }
}

/// `src,dst,weight` rows with six-decimal weights, in the given edge order.
pub fn edges_to_csv(labels: &[String], edges: &[Edge]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["src", "dst", "weight"])?;
    for e in edges {
        writer.write_record([labels[e.src].as_str(), labels[e.dst].as_str(), &format!("{:.6}", e.weight)])?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::domain(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
    out
}

/// GraphML 1.0 with every node, a `weight` attribute on each edge and a
/// `social` flag for edges in the known-tie overlay.
pub fn edges_to_graphml(graph: &InfluenceGraph, edges: &[Edge], directed: bool) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    out.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n");
    out.push_str("  <key id=\"social\" for=\"edge\" attr.name=\"social\" attr.type=\"boolean\">\n    <default>false</default>\n  </key>\n");
    let kind = if directed { "directed" } else { "undirected" };
    let _ = writeln!(out, "  <graph id=\"G\" edgedefault=\"{kind}\">");
    for label in &graph.labels {
        let _ = writeln!(out, "    <node id=\"{}\"/>", xml_escape(label));
    }
    for e in edges {
        let pair = (e.src.min(e.dst), e.src.max(e.dst));
        let _ = write!(
            out,
            "    <edge source=\"{}\" target=\"{}\"><data key=\"weight\">{:.6}</data>",
            xml_escape(&graph.labels[e.src]),
            xml_escape(&graph.labels[e.dst]),
            e.weight
        );
        if graph.social.binary_search(&pair).is_ok() {
            out.push_str("<data key=\"social\">true</data>");
        }
        out.push_str("</edge>\n");
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

/// Writes `edges` of `graph` to `path`. Forests are exported undirected.
pub fn export_graph(graph: &InfluenceGraph, edges: &[Edge], directed: bool, path: &Path, format: GraphFormat) -> Result<()> {
    let text = match format {
        GraphFormat::Csv => edges_to_csv(&graph.labels, edges)?,
        GraphFormat::GraphMl => edges_to_graphml(graph, edges, directed),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Edge list read back from the CSV format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEdge {
    pub src: String,
    pub dst: String,
    pub weight: f64,
}

pub fn import_edges_csv(path: &Path) -> Result<Vec<LabeledEdge>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::domain(format!("{other:?}")),
    })?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["src", "dst", "weight"] {
        return Err(Error::Parse { path: path.to_path_buf(), line: 1, message: "expected header src,dst,weight".into() });
    }
    let mut out = Vec::new();
    for record in reader.deserialize::<LabeledEdge>() {
        out.push(record?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc(ab: f64, ac: f64, bc: f64) -> InfluenceGraph {
        let labels = vec!["A".to_string(), "B".to_string(), "C".to_string()];
        InfluenceGraph::from_edges(
            labels,
            vec![
                Edge { src: 0, dst: 1, weight: ab },
                Edge { src: 0, dst: 2, weight: ac },
                Edge { src: 1, dst: 2, weight: bc },
            ],
        )
        .unwrap()
    }

    fn pairs(edges: &[Edge]) -> Vec<(usize, usize)> {
        edges.iter().map(|e| (e.src, e.dst)).collect()
    }

    #[test]
    fn kruskal_example() {
        let g = abc(0.95, 0.92, 0.80);
        assert_eq!(pairs(&mwsf(&g, 0.9).unwrap()), vec![(0, 1), (0, 2)]);
        assert!(mwsf(&g, 1.0).unwrap().is_empty());
        // All edges survive at zero; the lightest edge closes a cycle.
        assert_eq!(pairs(&mwsf(&g, 0.0).unwrap()), vec![(0, 1), (0, 2)]);
        assert!(mwsf(&g, 1.5).is_err());
    }

    #[test]
    fn symmetrization_takes_the_max() {
        let a = Matrix::from_rows(&[vec![9.0, 0.2, 0.0], vec![0.8, 0.0, 0.4], vec![0.0, 0.1, 0.0]]).unwrap();
        let g = InfluenceGraph::from_influence(&a, None).unwrap();
        // Diagonal excluded from both the edges and the normalising maximum.
        assert_eq!(g.edges.len(), 4);
        let sym = g.symmetrized();
        assert_eq!(pairs(&sym), vec![(0, 1), (1, 2)]);
        assert!((sym[0].weight - 1.0).abs() < 1e-15);
        assert!((sym[1].weight - 0.5).abs() < 1e-15);
    }

    #[test]
    fn weight_ties_break_by_pair() {
        let g = abc(0.5, 0.5, 0.5);
        assert_eq!(pairs(&mwsf(&g, 0.0).unwrap()), vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn csv_format_and_round_trip() {
        let g = abc(0.95, 0.92, 0.80);
        let forest = mwsf(&g, 0.9).unwrap();
        let text = edges_to_csv(&g.labels, &forest).unwrap();
        assert_eq!(text, "src,dst,weight\nA,B,0.950000\nA,C,0.920000\n");
        assert_eq!(edges_to_csv(&g.labels, &[]).unwrap(), "src,dst,weight\n");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.csv");
        export_graph(&g, &forest, false, &path, GraphFormat::from_path(&path)).unwrap();
        let back = import_edges_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!((back[1].src.as_str(), back[1].dst.as_str(), back[1].weight), ("A", "C", 0.92));
    }

    #[test]
    fn graphml_lists_nodes_edges_and_social_flags() {
        let g = abc(0.95, 0.92, 0.80).with_social(vec![(2, 0)]);
        let forest = mwsf(&g, 0.9).unwrap();
        let xml = edges_to_graphml(&g, &forest, false);
        assert!(xml.contains("edgedefault=\"undirected\""));
        assert_eq!(xml.matches("<node ").count(), 3);
        assert_eq!(xml.matches("<edge ").count(), 2);
        assert!(xml.contains("<edge source=\"A\" target=\"C\"><data key=\"weight\">0.920000</data><data key=\"social\">true</data></edge>"));
        assert_eq!(GraphFormat::from_path(Path::new("x.GraphML")), GraphFormat::GraphMl);
    }
}
