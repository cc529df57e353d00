use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dtg::{copy_label, DottedTripleGraph};
use crate::error::{DqcError, Result};
use crate::qstate::QubitLabel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Computation,
    Trap,
    Dummy,
}

const PERMUTATIONS: [[Role; 3]; 6] = {
    use Role::*;
    [
        [Computation, Trap, Dummy],
        [Computation, Dummy, Trap],
        [Trap, Computation, Dummy],
        [Trap, Dummy, Computation],
        [Dummy, Computation, Trap],
        [Dummy, Trap, Computation],
    ]
};

/// Partition of the `DT(G)` nodes into computation, trap and dummy nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrapColoring {
    pub computation: BTreeSet<QubitLabel>,
    pub dummies: BTreeSet<QubitLabel>,
    pub traps: BTreeSet<QubitLabel>,
    pub input_positions: Vec<QubitLabel>,
    /// Role of copies 0, 1, 2 of each base vertex.
    pub primary_roles: BTreeMap<QubitLabel, [Role; 3]>,
}

impl TrapColoring {
    /// Complete a colouring from the roles of the primary copies.
    ///
    /// An added vertex joining two computation copies is a computation dot,
    /// one joining two dummy copies is a trap, and every other added vertex
    /// is a dummy.
    pub fn from_primary_roles(
        dtg: &DottedTripleGraph,
        primary_roles: BTreeMap<QubitLabel, [Role; 3]>,
        input_positions: Vec<QubitLabel>,
    ) -> Result<TrapColoring> {
        let mut c = TrapColoring {
            computation: BTreeSet::new(),
            dummies: BTreeSet::new(),
            traps: BTreeSet::new(),
            input_positions,
            primary_roles,
        };
        for v in dtg.base.vertices() {
            let roles = *c
                .primary_roles
                .get(v)
                .ok_or_else(|| DqcError::Precondition(format!("no roles for base vertex {v}")))?;
            for (i, r) in roles.iter().enumerate() {
                c.set_mut(*r).insert(copy_label(v, i));
            }
        }
        for nine in dtg.added.values() {
            for a in nine {
                let ((u, i), (v, j)) = dtg.endpoints(a).expect("added vertex").clone();
                let r = match (c.primary_roles[&u][i], c.primary_roles[&v][j]) {
                    (Role::Computation, Role::Computation) => Role::Computation,
                    (Role::Dummy, Role::Dummy) => Role::Trap,
                    _ => Role::Dummy,
                };
                c.set_mut(r).insert(a.clone());
            }
        }
        c.check(dtg)?;
        Ok(c)
    }

    fn set_mut(&mut self, r: Role) -> &mut BTreeSet<QubitLabel> {
        match r {
            Role::Computation => &mut self.computation,
            Role::Trap => &mut self.traps,
            Role::Dummy => &mut self.dummies,
        }
    }

    pub fn role(&self, label: &QubitLabel) -> Option<Role> {
        if self.computation.contains(label) {
            Some(Role::Computation)
        } else if self.traps.contains(label) {
            Some(Role::Trap)
        } else if self.dummies.contains(label) {
            Some(Role::Dummy)
        } else {
            None
        }
    }

    /// The copy of base vertex `v` carrying role `r`.
    pub fn copy_with(&self, v: &QubitLabel, r: Role) -> Result<QubitLabel> {
        let roles = self.primary_roles.get(v).ok_or_else(|| DqcError::UnknownVertex(v.0.clone()))?;
        let i = roles.iter().position(|&x| x == r).expect("each role once");
        Ok(copy_label(v, i))
    }

    pub fn computation_copy(&self, v: &QubitLabel) -> Result<QubitLabel> {
        self.copy_with(v, Role::Computation)
    }

    pub fn trap_copy(&self, v: &QubitLabel) -> Result<QubitLabel> {
        self.copy_with(v, Role::Trap)
    }

    pub fn dummy_copy(&self, v: &QubitLabel) -> Result<QubitLabel> {
        self.copy_with(v, Role::Dummy)
    }

    /// Partition, one-of-each, trap isolation and input placement.
    pub fn check(&self, dtg: &DottedTripleGraph) -> Result<()> {
        let bad = |m: String| Err(DqcError::Precondition(m));
        let total = self.computation.len() + self.traps.len() + self.dummies.len();
        if total != dtg.num_vertices() || dtg.labels().iter().any(|l| self.role(l).is_none()) {
            return bad("colouring is not a partition of DT(G)".into());
        }
        for (v, roles) in &self.primary_roles {
            let mut sorted = *roles;
            sorted.sort();
            if sorted != [Role::Computation, Role::Trap, Role::Dummy] {
                return bad(format!("base vertex {v} lacks one copy per role"));
            }
        }
        for t in &self.traps {
            for n in dtg.graph.neighbors(t)? {
                if !self.dummies.contains(&n) {
                    return bad(format!("trap {t} has non-dummy neighbour {n}"));
                }
            }
        }
        for p in &self.input_positions {
            if !self.computation.contains(p) {
                return bad(format!("input position {p} is not a computation node"));
            }
        }
        Ok(())
    }
}

/// Per base vertex, the role permutations that put every input there in `C`.
fn allowed(dtg: &DottedTripleGraph, inputs: &[QubitLabel]) -> Result<Vec<(QubitLabel, Vec<[Role; 3]>)>> {
    let mut pinned: BTreeMap<QubitLabel, usize> = BTreeMap::new();
    for p in inputs {
        let (v, i) = dtg
            .primary_of(p)
            .ok_or_else(|| DqcError::Precondition(format!("input position {p} is not a primary copy")))?;
        if let Some(j) = pinned.insert(v.clone(), i) {
            if j != i {
                return Err(DqcError::Precondition(format!("two input positions on base vertex {v}")));
            }
        }
    }
    Ok(dtg
        .base
        .vertices()
        .iter()
        .map(|v| {
            let perms = PERMUTATIONS
                .iter()
                .filter(|p| pinned.get(v).map_or(true, |&i| p[i] == Role::Computation))
                .copied()
                .collect();
            (v.clone(), perms)
        })
        .collect())
}

/// Every colouring consistent with the input positions, in lexicographic order.
pub fn enumerate_trap_colorings(dtg: &DottedTripleGraph, input_positions: &[QubitLabel]) -> Result<Vec<TrapColoring>> {
    let choices = allowed(dtg, input_positions)?;
    let mut out = Vec::new();
    let mut idx = vec![0usize; choices.len()];
    loop {
        let roles = choices.iter().zip(&idx).map(|((v, ps), &k)| (v.clone(), ps[k])).collect();
        out.push(TrapColoring::from_primary_roles(dtg, roles, input_positions.to_vec())?);
        let mut k = choices.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < choices[k].1.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Uniform sample from [`enumerate_trap_colorings`].
pub fn sample_trap_coloring<R: Rng + ?Sized>(
    dtg: &DottedTripleGraph,
    rng: &mut R,
    input_positions: &[QubitLabel],
) -> Result<TrapColoring> {
    let roles =
        allowed(dtg, input_positions)?.into_iter().map(|(v, ps)| (v, *ps.choose(rng).expect("non-empty"))).collect();
    TrapColoring::from_primary_roles(dtg, roles, input_positions.to_vec())
}
