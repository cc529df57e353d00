use std::collections::BTreeMap;

use super::Graph;
use crate::error::{DqcError, Result};
use crate::qstate::{QubitLabel, MAX_QUBITS};

/// Endpoint of an added vertex: base vertex and copy index.
pub type CopyRef = (QubitLabel, usize);

/// Dotted triple-graph `DT(G)`.
///
/// Each base vertex `v` becomes copies `v:0, v:1, v:2`. Each base edge
/// `(u, v)` becomes nine added vertices `u:i~v:j`, each joined to exactly
/// `u:i` and `v:j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DottedTripleGraph {
    pub base: Graph,
    pub primary: BTreeMap<QubitLabel, [QubitLabel; 3]>,
    /// Keyed by base edge in canonical order; entry `3i + j` is `u:i~v:j`.
    pub added: BTreeMap<(QubitLabel, QubitLabel), Vec<QubitLabel>>,
    pub graph: Graph,
    endpoints: BTreeMap<QubitLabel, (CopyRef, CopyRef)>,
}

pub fn copy_label(v: &QubitLabel, i: usize) -> QubitLabel {
    QubitLabel::new(format!("{v}:{i}"))
}

pub fn added_label(u: &QubitLabel, i: usize, v: &QubitLabel, j: usize) -> QubitLabel {
    QubitLabel::new(format!("{u}:{i}~{v}:{j}"))
}

pub fn dotted_triple_graph(g: &Graph) -> Result<DottedTripleGraph> {
    let size = 3 * g.num_vertices() + 9 * g.num_edges();
    if size > MAX_QUBITS {
        return Err(DqcError::SizeCap(size, MAX_QUBITS));
    }
    build(g)
}

/// Construction without the register cap; the result only serves graph queries.
pub(crate) fn build(g: &Graph) -> Result<DottedTripleGraph> {
    let mut graph = Graph::new(Vec::<QubitLabel>::new())?;
    let mut primary = BTreeMap::new();
    for v in g.vertices() {
        let copies = [copy_label(v, 0), copy_label(v, 1), copy_label(v, 2)];
        for c in &copies {
            graph.add_vertex(c.clone())?;
        }
        primary.insert(v.clone(), copies);
    }
    let mut added = BTreeMap::new();
    let mut endpoints = BTreeMap::new();
    for (u, v) in g.edges() {
        let mut nine = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                let a = added_label(&u, i, &v, j);
                graph.add_vertex(a.clone())?;
                graph.add_edge(&a, &copy_label(&u, i))?;
                graph.add_edge(&a, &copy_label(&v, j))?;
                endpoints.insert(a.clone(), ((u.clone(), i), (v.clone(), j)));
                nine.push(a);
            }
        }
        added.insert((u, v), nine);
    }
    Ok(DottedTripleGraph { base: g.clone(), primary, added, graph, endpoints })
}

impl DottedTripleGraph {
    pub fn copy(&self, v: &QubitLabel, i: usize) -> Result<QubitLabel> {
        self.primary.get(v).and_then(|c| c.get(i)).cloned().ok_or_else(|| DqcError::UnknownVertex(format!("{v}:{i}")))
    }

    /// Added vertex between `u:i` and `v:j`, in either orientation.
    pub fn added_vertex(&self, u: &QubitLabel, i: usize, v: &QubitLabel, j: usize) -> Result<QubitLabel> {
        if let Some(n) = self.added.get(&(u.clone(), v.clone())) {
            return Ok(n[3 * i + j].clone());
        }
        if let Some(n) = self.added.get(&(v.clone(), u.clone())) {
            return Ok(n[3 * j + i].clone());
        }
        Err(DqcError::UnknownVertex(format!("{u}:{i}~{v}:{j}")))
    }

    pub fn is_primary(&self, label: &QubitLabel) -> bool {
        !self.endpoints.contains_key(label) && self.graph.contains(label)
    }

    /// The two primary copies an added vertex joins.
    pub fn endpoints(&self, label: &QubitLabel) -> Option<&(CopyRef, CopyRef)> {
        self.endpoints.get(label)
    }

    /// Base vertex and copy index of a primary copy.
    pub fn primary_of(&self, label: &QubitLabel) -> Option<CopyRef> {
        self.primary.iter().find_map(|(v, cs)| cs.iter().position(|c| c == label).map(|i| (v.clone(), i)))
    }

    pub fn labels(&self) -> &[QubitLabel] {
        self.graph.vertices()
    }

    pub fn num_vertices(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn check_invariants(&self) -> Result<()> {
        let nv = self.base.num_vertices();
        let ne = self.base.num_edges();
        let bad = |m: String| Err(DqcError::InvalidGraph(m));
        if self.graph.num_vertices() != 3 * nv + 9 * ne {
            return bad("vertex count".into());
        }
        if self.graph.num_edges() != 18 * ne {
            return bad("edge count".into());
        }
        for (a, b) in self.graph.edges() {
            if self.is_primary(&a) && self.is_primary(&b) {
                return bad(format!("primary-primary edge {a}-{b}"));
            }
        }
        for ((u, v), nine) in &self.added {
            for (k, a) in nine.iter().enumerate() {
                let mut ns = self.graph.neighbors(a)?;
                ns.sort();
                let mut want = vec![copy_label(u, k / 3), copy_label(v, k % 3)];
                want.sort();
                if ns != want {
                    return bad(format!("added vertex {a} has neighbours {ns:?}"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_vertex_is_three_isolated_copies() {
        let d = dotted_triple_graph(&Graph::path(1)).unwrap();
        assert_eq!(d.num_vertices(), 3);
        assert_eq!(d.graph.num_edges(), 0);
        d.check_invariants().unwrap();
    }

    #[test]
    fn single_edge_counts() {
        let d = dotted_triple_graph(&Graph::path(2)).unwrap();
        assert_eq!(d.num_vertices(), 15);
        assert_eq!(d.graph.num_edges(), 18);
        d.check_invariants().unwrap();
        let a = d.added_vertex(&"2".into(), 1, &"1".into(), 0).unwrap();
        assert_eq!(a.as_str(), "1:0~2:1");
        assert!(d.is_primary(&"1:2".into()));
        assert!(!d.is_primary(&a));
        assert_eq!(d.primary_of(&"2:1".into()), Some(("2".into(), 1)));
    }

    #[test]
    fn counts_hold_on_small_random_bases() {
        for seed in 0..40 {
            let g = Graph::random(3, 0.4, seed);
            match dotted_triple_graph(&g) {
                Ok(d) => {
                    assert_eq!(d.num_vertices(), 3 * g.num_vertices() + 9 * g.num_edges());
                    d.check_invariants().unwrap();
                }
                Err(e) => {
                    assert!(3 * g.num_vertices() + 9 * g.num_edges() > MAX_QUBITS);
                    assert!(matches!(e, DqcError::SizeCap(..)));
                }
            }
        }
    }

    #[test]
    fn counts_hold_beyond_the_register_cap() {
        for seed in 0..20 {
            let g = Graph::random(6, 0.4, seed);
            let d = build(&g).unwrap();
            assert_eq!(d.num_vertices(), 3 * g.num_vertices() + 9 * g.num_edges());
            d.check_invariants().unwrap();
        }
    }

    #[test]
    fn size_cap_is_enforced() {
        assert!(matches!(dotted_triple_graph(&Graph::path(3)), Err(DqcError::SizeCap(27, 16))));
    }
}
