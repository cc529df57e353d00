//! Measurement patterns with flow-based angle adaptation and a local
//! reference evaluator.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DqcError, Result};
use crate::graphstate::Graph;
use crate::qstate::{Angle, Gate, MixedState, PureState, QubitLabel};

/// Measurement outcomes keyed by vertex.
pub type OutcomeRecord = BTreeMap<QubitLabel, u8>;

/// `(−1)^{sX}·φ + sZ·π`.
pub fn adapt_angle(phi: Angle, sx: u8, sz: u8) -> Angle {
    phi.signed(sx) + Angle::pi_times(sz)
}

/// XY-plane measurement pattern on a graph state.
///
/// `angles` are the bare measurement angles: measuring a vertex at `α` and
/// passing it on along the flow applies `H·Zrot(−α)` to the logical qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementPattern {
    pub graph: Graph,
    pub order: Vec<QubitLabel>,
    pub angles: BTreeMap<QubitLabel, Angle>,
    pub flow: BTreeMap<QubitLabel, QubitLabel>,
    pub inputs: Vec<QubitLabel>,
    pub outputs: Vec<QubitLabel>,
}

#[derive(Serialize, Deserialize)]
struct PatternJson {
    graph: serde_json::Value,
    order: Vec<QubitLabel>,
    angles: BTreeMap<QubitLabel, Angle>,
    #[serde(default)]
    flow: BTreeMap<QubitLabel, QubitLabel>,
    inputs: Vec<QubitLabel>,
    outputs: Vec<QubitLabel>,
}

/// One branch of a pattern run after output corrections.
#[derive(Clone, Debug)]
pub struct PatternBranch {
    pub outcomes: OutcomeRecord,
    pub probability: f64,
    pub output: PureState,
}

fn numbered(i: usize) -> QubitLabel {
    QubitLabel::new(i.to_string())
}

/// `i → i+1` on the path `1..=n`.
pub fn flow_for_path(n: usize) -> BTreeMap<QubitLabel, QubitLabel> {
    (1..n).map(|i| (numbered(i), numbered(i + 1))).collect()
}

/// Row-major successor within each row of [`Graph::grid`].
pub fn flow_for_grid(rows: usize, cols: usize) -> BTreeMap<QubitLabel, QubitLabel> {
    let name = |r: usize, c: usize| QubitLabel::new(format!("r{r}c{c}"));
    (0..rows).flat_map(|r| (0..cols.saturating_sub(1)).map(move |c| (name(r, c), name(r, c + 1)))).collect()
}

impl MeasurementPattern {
    pub fn new(
        graph: Graph,
        order: Vec<QubitLabel>,
        angles: BTreeMap<QubitLabel, Angle>,
        flow: BTreeMap<QubitLabel, QubitLabel>,
        inputs: Vec<QubitLabel>,
        outputs: Vec<QubitLabel>,
    ) -> Result<MeasurementPattern> {
        let p = MeasurementPattern { graph, order, angles, flow, inputs, outputs };
        p.validate()?;
        Ok(p)
    }

    /// Single vertex that is both input and output.
    pub fn identity() -> MeasurementPattern {
        let g = Graph::path(1);
        let v = g.vertices().to_vec();
        MeasurementPattern::new(g, vec![], BTreeMap::new(), BTreeMap::new(), v.clone(), v).expect("valid")
    }

    /// Path pattern implementing `J(φ_k)···J(φ_1)` with `J(φ) = H·Zrot(φ)`.
    pub fn j_chain(phis: &[Angle]) -> MeasurementPattern {
        let n = phis.len() + 1;
        let angles = phis.iter().enumerate().map(|(i, &p)| (numbered(i + 1), -p)).collect();
        MeasurementPattern::new(
            Graph::path(n),
            (1..n).map(numbered).collect(),
            angles,
            flow_for_path(n),
            vec![numbered(1)],
            vec![numbered(n)],
        )
        .expect("valid")
    }

    /// Grid pattern: inputs on the first column, outputs on the last,
    /// measured column by column.
    pub fn grid(rows: usize, cols: usize, angles: BTreeMap<QubitLabel, Angle>) -> Result<MeasurementPattern> {
        let name = |r: usize, c: usize| QubitLabel::new(format!("r{r}c{c}"));
        let order = (0..cols.saturating_sub(1)).flat_map(|c| (0..rows).map(move |r| name(r, c))).collect();
        MeasurementPattern::new(
            Graph::grid(rows, cols),
            order,
            angles,
            flow_for_grid(rows, cols),
            (0..rows).map(|r| name(r, 0)).collect(),
            (0..rows).map(|r| name(r, cols - 1)).collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DqcError::InvalidPattern(m));
        let known = |l: &QubitLabel| -> Result<()> { self.graph.index_of(l).map(|_| ()) };
        for l in self.order.iter().chain(&self.inputs).chain(&self.outputs) {
            known(l)?;
        }
        for (a, b) in &self.flow {
            known(a)?;
            known(b)?;
        }
        let measured: BTreeSet<_> = self.order.iter().collect();
        let outs: BTreeSet<_> = self.outputs.iter().collect();
        if measured.len() != self.order.len() || outs.len() != self.outputs.len() {
            return bad("repeated vertex in order or outputs".into());
        }
        if self.inputs.iter().collect::<BTreeSet<_>>().len() != self.inputs.len() {
            return bad("repeated input vertex".into());
        }
        if measured.intersection(&outs).next().is_some() {
            return bad("output vertex is measured".into());
        }
        if measured.len() + outs.len() != self.graph.num_vertices() {
            return bad("every vertex must be measured or an output".into());
        }
        let pos: BTreeMap<&QubitLabel, usize> = self.order.iter().enumerate().map(|(k, v)| (v, k)).collect();
        let after = |w: &QubitLabel, k: usize| pos.get(w).map_or(true, |&j| j > k);
        let mut images = BTreeSet::new();
        for (k, v) in self.order.iter().enumerate() {
            if !self.angles.contains_key(v) {
                return bad(format!("measured vertex {v} has no angle"));
            }
            let Some(f) = self.flow.get(v) else {
                return bad(format!("measured vertex {v} has no flow image"));
            };
            if !self.graph.has_edge(v, f) {
                return bad(format!("flow {v}→{f} is not an edge"));
            }
            if self.inputs.contains(f) {
                return bad(format!("flow image {f} is an input"));
            }
            if !images.insert(f) {
                return bad(format!("flow is not injective at {f}"));
            }
            if !after(f, k) {
                return Err(DqcError::OrderViolation(format!("{f} measured before its flow predecessor {v}")));
            }
            for w in self.graph.neighbors(f)? {
                if &w != v && !after(&w, k) {
                    return Err(DqcError::OrderViolation(format!("{w} in N({f}) measured before {v}")));
                }
            }
        }
        if self.flow.keys().any(|v| !measured.contains(v)) {
            return bad("flow defined on an unmeasured vertex".into());
        }
        Ok(())
    }

    /// `(sX, sZ)` for `v` given the outcomes so far.
    pub fn corrections(&self, v: &QubitLabel, outcomes: &OutcomeRecord) -> (u8, u8) {
        let mut sx = 0;
        let mut sz = 0;
        for (i, s) in outcomes {
            let Some(f) = self.flow.get(i) else { continue };
            if f == v {
                sx ^= s;
            } else if i != v && self.graph.has_edge(f, v) {
                sz ^= s;
            }
        }
        (sx & 1, sz & 1)
    }

    /// Measurement angle actually used at `v`.
    pub fn adapted_angle(&self, v: &QubitLabel, outcomes: &OutcomeRecord) -> Angle {
        let (sx, sz) = self.corrections(v, outcomes);
        adapt_angle(self.angles[v], sx, sz)
    }

    pub fn from_json(text: &str) -> Result<MeasurementPattern> {
        let raw: PatternJson =
            serde_json::from_str(text).map_err(|e| DqcError::Config(format!("pattern JSON: {e}")))?;
        let graph = Graph::from_json(&raw.graph.to_string())?;
        MeasurementPattern::new(graph, raw.order, raw.angles, raw.flow, raw.inputs, raw.outputs)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(PatternJson {
            graph: self.graph.to_json(),
            order: self.order.clone(),
            angles: self.angles.clone(),
            flow: self.flow.clone(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
        })
        .expect("serialisable")
    }

    /// Input on the input vertices, `|+⟩` elsewhere, then `E_G`.
    fn prepare(&self, input: &PureState) -> Result<PureState> {
        let have: BTreeSet<_> = input.labels().iter().collect();
        let want: BTreeSet<_> = self.inputs.iter().collect();
        if have != want {
            return Err(DqcError::Dimension(format!(
                "input registers {:?} do not match pattern inputs {:?}",
                input.labels(),
                self.inputs
            )));
        }
        let mut s = input.clone();
        for v in self.graph.vertices() {
            if !want.contains(v) {
                s = s.tensor(&PureState::plus(v.clone()))?;
            }
        }
        for (a, b) in self.graph.edges() {
            s.apply_gate_mut(Gate::CZ, &[a, b])?;
        }
        s.reorder(self.graph.vertices())
    }

    fn correct_outputs(&self, mut s: PureState, outcomes: &OutcomeRecord) -> Result<PureState> {
        for o in &self.outputs {
            let (sx, sz) = self.corrections(o, outcomes);
            if sx == 1 {
                s.apply_gate_mut(Gate::X, std::slice::from_ref(o))?;
            }
            if sz == 1 {
                s.apply_gate_mut(Gate::Z, std::slice::from_ref(o))?;
            }
        }
        s.reorder(&self.outputs)
    }
}

/// Every branch with nonzero probability, corrected and ordered as `outputs`.
pub fn pattern_branches(p: &MeasurementPattern, input: &PureState) -> Result<Vec<PatternBranch>> {
    fn walk(
        p: &MeasurementPattern,
        k: usize,
        state: PureState,
        prob: f64,
        outcomes: &mut OutcomeRecord,
        out: &mut Vec<PatternBranch>,
    ) -> Result<()> {
        let Some(v) = p.order.get(k) else {
            out.push(PatternBranch {
                outcomes: outcomes.clone(),
                probability: prob,
                output: p.correct_outputs(state, outcomes)?,
            });
            return Ok(());
        };
        let delta = p.adapted_angle(v, outcomes);
        for b in state.measure_xy(v, delta)? {
            if let Some(next) = b.state {
                outcomes.insert(v.clone(), b.outcome);
                walk(p, k + 1, next, prob * b.probability, outcomes, out)?;
                outcomes.remove(v);
            }
        }
        Ok(())
    }
    p.validate()?;
    let s = p.prepare(input)?;
    let mut out = Vec::new();
    walk(p, 0, s, 1.0, &mut OutcomeRecord::new(), &mut out)?;
    Ok(out)
}

/// Branch-averaged output of the pattern on `input`.
pub fn run_pattern_local(p: &MeasurementPattern, input: &PureState) -> Result<MixedState> {
    let items: Vec<(f64, PureState)> =
        pattern_branches(p, input)?.into_iter().map(|b| (b.probability, b.output)).collect();
    MixedState::mixture(&items)
}

/// Unitary implemented by a deterministic pattern, read off the all-zero branch.
pub fn pattern_unitary(p: &MeasurementPattern) -> Result<DMatrix<Complex64>> {
    let k = p.inputs.len();
    if k > 3 {
        return Err(DqcError::Precondition(format!("pattern_unitary supports at most 3 inputs, got {k}")));
    }
    if p.outputs.len() != k {
        return Err(DqcError::NonDeterministic(format!("{k} inputs but {} outputs", p.outputs.len())));
    }
    p.validate()?;
    let dim = 1usize << k;
    let scale = 2f64.powf(p.order.len() as f64 / 2.0);
    let mut u = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        let bits: Vec<u8> = (0..k).map(|i| (x >> (k - 1 - i) & 1) as u8).collect();
        let mut s = p.prepare(&PureState::basis(p.inputs.clone(), &bits)?)?;
        for v in &p.order {
            let ket = PureState::xy_basis("_", p.angles[v], 0);
            let a = ket.amplitudes();
            s = s.project_unnormalised(v, [a[0], a[1]])?;
        }
        let s = s.reorder(&p.outputs)?;
        for (r, a) in s.amplitudes().iter().enumerate() {
            u[(r, x)] = a * scale;
        }
    }
    let gram = u.adjoint() * &u - DMatrix::<Complex64>::identity(dim, dim);
    if gram.iter().any(|z| z.norm() > 1e-10) {
        return Err(DqcError::NonDeterministic("all-zero branch is not unitary".into()));
    }
    check_determinism(p, &u)?;
    Ok(u)
}

/// Every branch on a phase-sensitive probe set must reproduce `u`.
fn check_determinism(p: &MeasurementPattern, u: &DMatrix<Complex64>) -> Result<()> {
    let dim = u.ncols();
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let mut probes: Vec<Vec<Complex64>> = Vec::new();
    for j in 0..dim {
        let mut e = vec![c(0.0, 0.0); dim];
        e[j] = c(1.0, 0.0);
        probes.push(e);
        if j > 0 {
            for ph in [c(1.0, 0.0), c(0.0, 1.0)] {
                let mut e = vec![c(0.0, 0.0); dim];
                e[0] = c(1.0, 0.0);
                e[j] = ph;
                probes.push(e);
            }
        }
    }
    for amps in probes {
        let input = PureState::normalised(p.inputs.clone(), amps.clone())?;
        let want = u * nalgebra::DVector::from_vec(input.amplitudes().to_vec());
        let want = PureState::normalised(p.outputs.clone(), want.iter().copied().collect())?;
        for b in pattern_branches(p, &input)? {
            let f = b.output.fidelity(&want)?;
            if f < 1.0 - 1e-10 {
                return Err(DqcError::NonDeterministic(format!(
                    "branch {:?} has fidelity {f} with the reference",
                    b.outcomes
                )));
            }
        }
    }
    Ok(())
}
