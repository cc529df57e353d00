//! Graphs, graph states and their stabilizers, two-colourings, the dotted
//! triple-graph and trap colourings.

mod coloring;
mod dtg;
mod graph;

use std::collections::{BTreeSet, VecDeque};

use num_complex::Complex64;

pub use coloring::{enumerate_trap_colorings, sample_trap_coloring, Role, TrapColoring};
pub use dtg::{dotted_triple_graph, DottedTripleGraph};
pub use graph::Graph;

use crate::error::{DqcError, Result};
use crate::qstate::{Pauli, PauliString, PureState, QubitLabel, MAX_QUBITS};

/// `E_G ⊗_v |+⟩` with registers in vertex order.
pub fn graph_state(g: &Graph) -> Result<PureState> {
    let n = g.num_vertices();
    if n > MAX_QUBITS {
        return Err(DqcError::SizeCap(n, MAX_QUBITS));
    }
    let masks: Vec<(usize, usize)> =
        g.edge_indices().into_iter().map(|(i, j)| (1 << (n - 1 - i), 1 << (n - 1 - j))).collect();
    let a = (0.5f64).powf(n as f64 / 2.0);
    let amps = (0..1usize << n)
        .map(|x| {
            let odd = masks.iter().filter(|&&(p, q)| x & p != 0 && x & q != 0).count() % 2;
            Complex64::new(if odd == 1 { -a } else { a }, 0.0)
        })
        .collect();
    PureState::from_amplitudes(g.vertices().to_vec(), amps)
}

/// `g_j = X_j ⊗_{i∈N(j)} Z_i`.
pub fn stabilizer_generator(g: &Graph, j: &QubitLabel) -> Result<PauliString> {
    let mut s = PauliString::single(j.clone(), Pauli::X);
    for n in g.neighbors(j)? {
        s.set(n, Pauli::Z);
    }
    Ok(s)
}

/// Product of the generators over `subset`, taken in vertex order.
pub fn stabilizer_element(g: &Graph, subset: &BTreeSet<QubitLabel>) -> Result<PauliString> {
    for v in subset {
        g.index_of(v)?;
    }
    let mut s = PauliString::identity();
    for v in g.vertices().iter().filter(|v| subset.contains(*v)) {
        s = s * stabilizer_generator(g, v)?;
    }
    Ok(s)
}

/// Subset of vertices selected by the bits of `mask` (bit `i` = vertex `i`).
pub fn subset_from_mask(g: &Graph, mask: u64) -> BTreeSet<QubitLabel> {
    g.vertices().iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, v)| v.clone()).collect()
}

/// All `2^|V|` stabilizer elements with their generating subsets.
pub fn all_stabilizer_elements(g: &Graph) -> Result<Vec<(BTreeSet<QubitLabel>, PauliString)>> {
    let n = g.num_vertices();
    if n > MAX_QUBITS {
        return Err(DqcError::SizeCap(n, MAX_QUBITS));
    }
    (0..1u64 << n)
        .map(|m| {
            let s = subset_from_mask(g, m);
            let e = stabilizer_element(g, &s)?;
            Ok((s, e))
        })
        .collect()
}

/// Bipartition with every edge crossing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoColoring {
    pub black: BTreeSet<QubitLabel>,
    pub white: BTreeSet<QubitLabel>,
}

impl TwoColoring {
    pub fn is_black(&self, v: &QubitLabel) -> bool {
        self.black.contains(v)
    }

    pub fn is_valid_for(&self, g: &Graph) -> bool {
        let cover = self.black.len() + self.white.len() == g.num_vertices()
            && g.vertices().iter().all(|v| self.black.contains(v) != self.white.contains(v));
        cover && g.edges().iter().all(|(a, b)| self.is_black(a) != self.is_black(b))
    }
}

/// Odd cycle proving a graph is not two-colourable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OddCycle(pub Vec<QubitLabel>);

/// Breadth-first two-colouring; the first vertex of each component is black.
pub fn find_two_coloring(g: &Graph) -> std::result::Result<TwoColoring, OddCycle> {
    let n = g.num_vertices();
    let mut color: Vec<Option<bool>> = vec![None; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    for root in 0..n {
        if color[root].is_some() {
            continue;
        }
        color[root] = Some(true);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbor_indices(u) {
                match color[v] {
                    None => {
                        color[v] = color[u].map(|c| !c);
                        parent[v] = Some(u);
                        queue.push_back(v);
                    }
                    Some(c) if Some(c) == color[u] => {
                        return Err(OddCycle(odd_cycle(g, &parent, u, v)));
                    }
                    _ => {}
                }
            }
        }
    }
    let mut out = TwoColoring { black: BTreeSet::new(), white: BTreeSet::new() };
    for (i, v) in g.vertices().iter().enumerate() {
        if color[i] == Some(true) {
            out.black.insert(v.clone());
        } else {
            out.white.insert(v.clone());
        }
    }
    Ok(out)
}

fn odd_cycle(g: &Graph, parent: &[Option<usize>], u: usize, v: usize) -> Vec<QubitLabel> {
    let chain = |mut x: usize| {
        let mut c = vec![x];
        while let Some(p) = parent[x] {
            c.push(p);
            x = p;
        }
        c
    };
    let cu = chain(u);
    let cv = chain(v);
    let lca = *cu.iter().find(|x| cv.contains(x)).expect("same BFS tree");
    let mut cycle: Vec<usize> = cu.iter().copied().take_while(|&x| x != lca).collect();
    cycle.push(lca);
    let back: Vec<usize> = cv.iter().copied().take_while(|&x| x != lca).collect();
    cycle.extend(back.into_iter().rev());
    cycle.into_iter().map(|i| g.vertices()[i].clone()).collect()
}
