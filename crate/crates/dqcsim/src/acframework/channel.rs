use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::engine::{Message, System, World};
use crate::error::{DqcError, Result};
use crate::qstate::{trace_norm, PureState, QubitLabel};

/// Largest number of reference plus output qubits in one Choi block.
pub const MAX_CHOI_QUBITS: usize = 8;
/// Distances at or below this count as exact equality.
pub const EXACT_TOL: f64 = 1e-10;

/// A message supplied at an open input port; `qubits` fresh registers are
/// attached, each maximally entangled with a reference qubit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenInput {
    pub port: String,
    pub tag: String,
    pub classical: Vec<i64>,
    pub qubits: usize,
}

impl OpenInput {
    pub fn classical(port: &str, tag: &str, values: Vec<i64>) -> OpenInput {
        OpenInput { port: port.into(), tag: tag.into(), classical: values, qubits: 0 }
    }

    pub fn quantum(port: &str, tag: &str, qubits: usize) -> OpenInput {
        OpenInput { port: port.into(), tag: tag.into(), classical: vec![], qubits }
    }
}

/// One fixed assignment of everything a distinguisher feeds in.
pub type Probe = Vec<OpenInput>;

/// Cartesian product of per-port alternatives.
pub fn probe_grid(choices: &[Vec<OpenInput>]) -> Vec<Probe> {
    let mut out: Vec<Probe> = vec![vec![]];
    for alts in choices {
        out = out
            .into_iter()
            .flat_map(|p| {
                alts.iter().map(move |a| {
                    let mut q = p.clone();
                    q.push(a.clone());
                    q
                })
            })
            .collect();
    }
    out
}

/// Unnormalised Choi blocks keyed by the classical outputs.
///
/// Each block acts on the reference qubits followed by the output qubits in
/// port-list order; the traces of all blocks sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Choi {
    pub blocks: BTreeMap<String, DMatrix<Complex64>>,
    pub reference_qubits: usize,
}

impl Choi {
    pub fn total_trace(&self) -> f64 {
        self.blocks.values().map(|m| m.trace().re).sum()
    }

    pub fn scale(&self, p: f64) -> Choi {
        Choi {
            blocks: self.blocks.iter().map(|(k, m)| (k.clone(), m * Complex64::new(p, 0.0))).collect(),
            reference_qubits: self.reference_qubits,
        }
    }

    pub fn add(&self, other: &Choi) -> Result<Choi> {
        let mut blocks = self.blocks.clone();
        for (k, m) in &other.blocks {
            match blocks.get_mut(k) {
                Some(b) if b.shape() == m.shape() => *b += m,
                Some(_) => return Err(DqcError::Dimension(format!("block `{k}`"))),
                None => {
                    blocks.insert(k.clone(), m.clone());
                }
            }
        }
        Ok(Choi { blocks, reference_qubits: self.reference_qubits })
    }
}

fn output_key(w: &World, outputs: &[String]) -> (String, Vec<QubitLabel>) {
    let mut parts = Vec::new();
    let mut qubits = Vec::new();
    for (i, port) in outputs.iter().enumerate() {
        for m in w.outputs.get(port).map(Vec::as_slice).unwrap_or(&[]) {
            let vals: Vec<String> = m.classical.iter().map(i64::to_string).collect();
            parts.push(format!("{i}:{}:[{}]:{}", m.tag, vals.join(","), m.qubits.len()));
            qubits.extend(m.qubits.iter().cloned());
        }
    }
    (parts.join("|"), qubits)
}

/// Exact channel of `sys` under `probe`, with open outputs read in `outputs` order.
pub fn extract_channel(sys: &System, probe: &Probe, outputs: &[String]) -> Result<Choi> {
    let open_in = sys.open_inputs();
    for i in probe {
        if !open_in.contains(&i.port) {
            return Err(DqcError::InterfaceMismatch(format!("`{}` is not an open input", i.port)));
        }
    }
    let want: BTreeSet<String> = outputs.iter().cloned().collect();
    if want != sys.open_outputs() || want.len() != outputs.len() {
        return Err(DqcError::InterfaceMismatch(format!(
            "outputs {outputs:?} do not match open outputs {:?}",
            sys.open_outputs()
        )));
    }
    let mut world = World::new();
    let mut refs = Vec::new();
    for (i, input) in probe.iter().enumerate() {
        let mut qs = Vec::new();
        for k in 0..input.qubits {
            let r = QubitLabel::new(format!("ref.{i}.{k}"));
            let q = QubitLabel::new(format!("{}#{i}.{k}", input.port));
            world.add_state(&PureState::epr(r.clone(), q.clone())?)?;
            refs.push(r);
            qs.push(q);
        }
        let msg = Message { tag: input.tag.clone(), classical: input.classical.clone(), qubits: qs };
        world.inject(&input.port, msg);
    }
    let mut blocks: BTreeMap<String, DMatrix<Complex64>> = BTreeMap::new();
    for w in sys.enumerate(world)? {
        let (key, outq) = output_key(&w, outputs);
        let mut keep = refs.clone();
        keep.extend(outq);
        if keep.len() > MAX_CHOI_QUBITS {
            return Err(DqcError::SizeCap(keep.len(), MAX_CHOI_QUBITS));
        }
        let rho = w.state.reduced(&keep)?;
        let m = rho.matrix() * Complex64::new(w.prob, 0.0);
        match blocks.get_mut(&key) {
            Some(b) => *b += m,
            None => {
                blocks.insert(key, m);
            }
        }
    }
    Ok(Choi { blocks, reference_qubits: refs.len() })
}

/// `½ Σ_k ‖A_k − B_k‖₁` over the union of keys.
pub fn choi_distance(a: &Choi, b: &Choi) -> Result<f64> {
    let keys: BTreeSet<&String> = a.blocks.keys().chain(b.blocks.keys()).collect();
    let mut total = 0.0;
    for k in keys {
        total += match (a.blocks.get(k), b.blocks.get(k)) {
            (Some(x), Some(y)) if x.shape() == y.shape() => trace_norm(&(x - y)),
            (Some(_), Some(_)) => return Err(DqcError::Dimension(format!("block `{k}` differs in size"))),
            (Some(x), None) | (None, Some(x)) => trace_norm(x),
            (None, None) => 0.0,
        };
    }
    Ok(total / 2.0)
}

/// Result of comparing two systems over a probe set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distinguishability {
    pub epsilon: f64,
    pub worst_probe: Option<usize>,
    pub exact: bool,
    pub probes: usize,
}

/// Maximum Choi distance over `probes` between two systems.
pub fn distinguishability(
    a: &System,
    a_outputs: &[String],
    b: &System,
    b_outputs: &[String],
    probes: &[Probe],
) -> Result<Distinguishability> {
    if a.open_inputs() != b.open_inputs() {
        return Err(DqcError::InterfaceMismatch(format!("open inputs {:?} vs {:?}", a.open_inputs(), b.open_inputs())));
    }
    if a_outputs.len() != b_outputs.len() {
        return Err(DqcError::InterfaceMismatch("different numbers of open outputs".into()));
    }
    let mut eps = 0.0f64;
    let mut worst = None;
    for (i, p) in probes.iter().enumerate() {
        let d = choi_distance(&extract_channel(a, p, a_outputs)?, &extract_channel(b, p, b_outputs)?)?;
        if d > eps {
            eps = d;
            worst = Some(i);
        }
    }
    Ok(Distinguishability { epsilon: eps, worst_probe: worst, exact: eps <= EXACT_TOL, probes: probes.len() })
}
