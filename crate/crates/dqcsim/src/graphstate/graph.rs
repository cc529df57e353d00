use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DqcError, Result};
use crate::qstate::QubitLabel;

/// Simple undirected graph over labelled vertices.
///
/// Vertex order is insertion order and fixes the register order of
/// [`graph_state`](super::graph_state).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    vertices: Vec<QubitLabel>,
    index: BTreeMap<QubitLabel, usize>,
    adj: Vec<BTreeSet<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    vertices: Vec<serde_json::Value>,
    #[serde(default)]
    edges: Vec<[serde_json::Value; 2]>,
}

fn json_label(v: &serde_json::Value) -> Result<QubitLabel> {
    match v {
        serde_json::Value::String(s) => Ok(QubitLabel::new(s.clone())),
        serde_json::Value::Number(n) => Ok(QubitLabel::new(n.to_string())),
        other => Err(DqcError::Config(format!("vertex must be a string or number, got {other}"))),
    }
}

fn numbered(n: usize) -> Vec<QubitLabel> {
    (1..=n).map(|i| QubitLabel::new(i.to_string())).collect()
}

impl Graph {
    pub fn new<I, L>(vertices: I) -> Result<Graph>
    where
        I: IntoIterator<Item = L>,
        L: Into<QubitLabel>,
    {
        let mut g = Graph { vertices: Vec::new(), index: BTreeMap::new(), adj: Vec::new() };
        for v in vertices {
            g.add_vertex(v.into())?;
        }
        Ok(g)
    }

    pub fn from_edges<I, L>(vertices: I, edges: &[(&str, &str)]) -> Result<Graph>
    where
        I: IntoIterator<Item = L>,
        L: Into<QubitLabel>,
    {
        let mut g = Graph::new(vertices)?;
        for (a, b) in edges {
            g.add_edge(&QubitLabel::from(*a), &QubitLabel::from(*b))?;
        }
        Ok(g)
    }

    pub fn add_vertex(&mut self, v: QubitLabel) -> Result<()> {
        if self.index.contains_key(&v) {
            return Err(DqcError::DuplicateLabel(v.0));
        }
        self.index.insert(v.clone(), self.vertices.len());
        self.vertices.push(v);
        self.adj.push(BTreeSet::new());
        Ok(())
    }

    pub fn add_edge(&mut self, a: &QubitLabel, b: &QubitLabel) -> Result<()> {
        let i = self.index_of(a)?;
        let j = self.index_of(b)?;
        if i == j {
            return Err(DqcError::InvalidGraph(format!("self-loop at `{a}`")));
        }
        if !self.adj[i].insert(j) {
            return Err(DqcError::InvalidGraph(format!("duplicate edge `{a}`-`{b}`")));
        }
        self.adj[j].insert(i);
        Ok(())
    }

    pub fn index_of(&self, v: &QubitLabel) -> Result<usize> {
        self.index.get(v).copied().ok_or_else(|| DqcError::UnknownVertex(v.0.clone()))
    }

    pub fn contains(&self, v: &QubitLabel) -> bool {
        self.index.contains_key(v)
    }

    pub fn vertices(&self) -> &[QubitLabel] {
        &self.vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Edges as `(a, b)` with `a` before `b` in vertex order, sorted.
    pub fn edges(&self) -> Vec<(QubitLabel, QubitLabel)> {
        self.edge_indices().into_iter().map(|(i, j)| (self.vertices[i].clone(), self.vertices[j].clone())).collect()
    }

    pub fn edge_indices(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, ns) in self.adj.iter().enumerate() {
            for &j in ns.range(i + 1..) {
                out.push((i, j));
            }
        }
        out
    }

    pub fn has_edge(&self, a: &QubitLabel, b: &QubitLabel) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) => self.adj[i].contains(&j),
            _ => false,
        }
    }

    pub fn neighbors(&self, v: &QubitLabel) -> Result<Vec<QubitLabel>> {
        let i = self.index_of(v)?;
        Ok(self.adj[i].iter().map(|&j| self.vertices[j].clone()).collect())
    }

    pub fn neighbor_indices(&self, i: usize) -> &BTreeSet<usize> {
        &self.adj[i]
    }

    pub fn degree(&self, v: &QubitLabel) -> Result<usize> {
        Ok(self.adj[self.index_of(v)?].len())
    }

    /// Induced subgraph on `keep`, preserving vertex order.
    pub fn induced(&self, keep: &BTreeSet<QubitLabel>) -> Graph {
        let mut g =
            Graph::new(self.vertices.iter().filter(|v| keep.contains(*v)).cloned()).expect("labels already unique");
        for (a, b) in self.edges() {
            if keep.contains(&a) && keep.contains(&b) {
                g.add_edge(&a, &b).expect("edge endpoints exist");
            }
        }
        g
    }

    pub fn path(n: usize) -> Graph {
        let mut g = Graph::new(numbered(n)).expect("unique");
        for i in 1..n {
            g.add_edge(&g.vertices[i - 1].clone(), &g.vertices[i].clone()).expect("fresh edge");
        }
        g
    }

    pub fn cycle(n: usize) -> Result<Graph> {
        if n < 3 {
            return Err(DqcError::InvalidGraph(format!("cycle needs at least 3 vertices, got {n}")));
        }
        let mut g = Graph::path(n);
        let (a, b) = (g.vertices[n - 1].clone(), g.vertices[0].clone());
        g.add_edge(&a, &b)?;
        Ok(g)
    }

    /// Star with centre `0` and leaves `1..=leaves`.
    pub fn star(leaves: usize) -> Graph {
        let mut g = Graph::new((0..=leaves).map(|i| i.to_string())).expect("unique");
        let c = g.vertices[0].clone();
        for i in 1..=leaves {
            let l = g.vertices[i].clone();
            g.add_edge(&c, &l).expect("fresh edge");
        }
        g
    }

    /// Rectangular grid with vertices `r{row}c{col}` in row-major order.
    pub fn grid(rows: usize, cols: usize) -> Graph {
        let name = |r: usize, c: usize| QubitLabel::new(format!("r{r}c{c}"));
        let mut g = Graph::new((0..rows).flat_map(|r| (0..cols).map(move |c| name(r, c)))).expect("unique");
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    g.add_edge(&name(r, c), &name(r, c + 1)).expect("fresh edge");
                }
                if r + 1 < rows {
                    g.add_edge(&name(r, c), &name(r + 1, c)).expect("fresh edge");
                }
            }
        }
        g
    }

    pub fn complete(n: usize) -> Graph {
        let mut g = Graph::new(numbered(n)).expect("unique");
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (g.vertices[i].clone(), g.vertices[j].clone());
                g.add_edge(&a, &b).expect("fresh edge");
            }
        }
        g
    }

    /// Erdős–Rényi graph `G(n, p)` from a seeded generator.
    pub fn random(n: usize, p: f64, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = Graph::new(numbered(n)).expect("unique");
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(p.clamp(0.0, 1.0)) {
                    let (a, b) = (g.vertices[i].clone(), g.vertices[j].clone());
                    g.add_edge(&a, &b).expect("fresh edge");
                }
            }
        }
        g
    }

    pub fn from_json(text: &str) -> Result<Graph> {
        let raw: GraphJson = serde_json::from_str(text).map_err(|e| DqcError::Config(format!("graph JSON: {e}")))?;
        let vs = raw.vertices.iter().map(json_label).collect::<Result<Vec<_>>>()?;
        let mut g = Graph::new(vs)?;
        for [a, b] in &raw.edges {
            g.add_edge(&json_label(a)?, &json_label(b)?)?;
        }
        Ok(g)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "vertices": self.vertices,
            "edges": self.edges().into_iter().map(|(a, b)| [a, b]).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_have_expected_sizes() {
        assert_eq!(Graph::path(4).num_edges(), 3);
        assert_eq!(Graph::cycle(5).unwrap().num_edges(), 5);
        assert_eq!(Graph::star(3).num_edges(), 3);
        assert_eq!(Graph::grid(2, 3).num_edges(), 7);
        assert_eq!(Graph::complete(4).num_edges(), 6);
        assert!(Graph::cycle(2).is_err());
    }

    #[test]
    fn rejects_loops_and_multi_edges() {
        let mut g = Graph::path(2);
        let a = QubitLabel::from("1");
        let b = QubitLabel::from("2");
        assert!(matches!(g.add_edge(&a, &a), Err(DqcError::InvalidGraph(_))));
        assert!(matches!(g.add_edge(&b, &a), Err(DqcError::InvalidGraph(_))));
        assert!(matches!(g.add_edge(&a, &"9".into()), Err(DqcError::UnknownVertex(_))));
    }

    #[test]
    fn json_round_trip() {
        let g = Graph::from_json(r#"{"vertices": [1, 2, "c"], "edges": [[1, 2], [2, "c"]]}"#).unwrap();
        assert_eq!(g.num_edges(), 2);
        let back = Graph::from_json(&g.to_json().to_string()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn random_is_reproducible() {
        assert_eq!(Graph::random(6, 0.5, 7), Graph::random(6, 0.5, 7));
    }
}
