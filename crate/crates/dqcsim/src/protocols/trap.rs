use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::acframework::{Cx, Machine, Message, BLIND_CLIENT_IN, BLIND_CLIENT_OUT};
use crate::error::{DqcError, Result};
use crate::graphstate::{dotted_triple_graph, enumerate_trap_colorings, DottedTripleGraph, Graph, TrapColoring};
use crate::mbqc::{pattern_unitary, MeasurementPattern, OutcomeRecord};
use crate::qstate::{Angle, Gate, PauliString, PureState, QubitLabel};

pub const TRAP_INPUT: &str = "trap.input";
pub const TRAP_GRAPH: &str = "trap.graph";

/// Quarter-turn offset `i·π/2` used on the input row.
pub fn pad_angle(i: usize) -> Angle {
    Angle::new(4 * i as i64)
}

/// Client pad for one run: per input vertex an `X` bit on the slot carrying
/// the input and a `Z`-rotation on each of the three copies.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TrapPad {
    pub a: Vec<u8>,
    pub theta: Vec<[Angle; 3]>,
}

impl TrapPad {
    /// All `128^k` pads for `k` input vertices, in lexicographic order.
    pub fn all(inputs: usize) -> Vec<TrapPad> {
        let per = 2 * 4 * 4 * 4;
        let total = (0..inputs).fold(1usize, |acc, _| acc * per);
        (0..total)
            .map(|mut idx| {
                let mut pad = TrapPad { a: vec![], theta: vec![] };
                for _ in 0..inputs {
                    let mut th = [Angle::ZERO; 3];
                    for t in th.iter_mut().rev() {
                        *t = pad_angle(idx % 4);
                        idx /= 4;
                    }
                    pad.theta.push(th);
                    pad.a.push((idx % 2) as u8);
                    idx /= 2;
                }
                pad
            })
            .collect()
    }
}

/// A base pattern, its dotted triple-graph and the client input `ψ_C`.
#[derive(Clone, Debug)]
pub struct TrapInstance {
    pub dtg: DottedTripleGraph,
    pub pattern: MeasurementPattern,
    pub input: PureState,
    colorings: Vec<TrapColoring>,
    /// Computation pattern and honest output per colouring.
    computations: Vec<(MeasurementPattern, PureState)>,
}

/// Exact statistics of a protocol run averaged over colourings and pads.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrapEvaluation {
    pub p_accept: f64,
    /// Accepted with output orthogonal to the honest one.
    pub p_fail: f64,
    /// Smallest output fidelity on an accepted branch.
    pub min_fidelity: f64,
    /// Number of terminal branches visited.
    pub branches: usize,
    /// Terminal branches on which some trap parity failed.
    pub rejected_branches: usize,
}

impl TrapEvaluation {
    fn empty() -> TrapEvaluation {
        TrapEvaluation { p_accept: 0.0, p_fail: 0.0, min_fidelity: 1.0, branches: 0, rejected_branches: 0 }
    }

    fn merge(self, o: TrapEvaluation) -> TrapEvaluation {
        TrapEvaluation {
            p_accept: self.p_accept + o.p_accept,
            p_fail: self.p_fail + o.p_fail,
            min_fidelity: self.min_fidelity.min(o.min_fidelity),
            branches: self.branches + o.branches,
            rejected_branches: self.rejected_branches + o.rejected_branches,
        }
    }
}

impl TrapInstance {
    /// Every edge of the base graph must carry flow; dots on the flow edges
    /// become computation nodes measured at angle `0`.
    pub fn new(pattern: MeasurementPattern, input: PureState) -> Result<TrapInstance> {
        pattern.validate()?;
        let input = input.reorder(&pattern.inputs)?;
        for (a, b) in pattern.graph.edges() {
            if pattern.flow.get(&a) != Some(&b) && pattern.flow.get(&b) != Some(&a) {
                return Err(DqcError::Precondition(format!("edge {a}-{b} carries no flow")));
            }
        }
        let dtg = dotted_triple_graph(&pattern.graph)?;
        let colorings = enumerate_trap_colorings(&dtg, &[])?;
        let mut inst = TrapInstance { dtg, pattern, input, colorings, computations: vec![] };
        inst.computations = inst
            .colorings
            .iter()
            .map(|c| Ok((inst.computation_pattern(c)?, inst.expected_output(c)?)))
            .collect::<Result<_>>()?;
        Ok(inst)
    }

    pub fn colorings(&self) -> &[TrapColoring] {
        &self.colorings
    }

    /// The three copies of every input vertex, input by input.
    pub fn input_row(&self) -> Vec<QubitLabel> {
        self.pattern.inputs.iter().flat_map(|v| self.dtg.primary[v].iter().cloned()).collect()
    }

    /// Pattern run on the computation nodes of `c`.
    pub fn computation_pattern(&self, c: &TrapColoring) -> Result<MeasurementPattern> {
        let p = &self.pattern;
        let comp = |v: &QubitLabel| c.computation_copy(v);
        let dot = |v: &QubitLabel, w: &QubitLabel| -> Result<QubitLabel> {
            let (i, j) =
                (self.dtg.primary_of(&comp(v)?).expect("copy").1, self.dtg.primary_of(&comp(w)?).expect("copy").1);
            self.dtg.added_vertex(v, i, w, j)
        };
        let mut g = Graph::new(Vec::<QubitLabel>::new())?;
        let mut order = Vec::new();
        let mut angles = BTreeMap::new();
        let mut flow = BTreeMap::new();
        for v in p.graph.vertices() {
            g.add_vertex(comp(v)?)?;
        }
        for (v, w) in &p.flow {
            let d = dot(v, w)?;
            g.add_vertex(d.clone())?;
            g.add_edge(&comp(v)?, &d)?;
            g.add_edge(&d, &comp(w)?)?;
            flow.insert(comp(v)?, d.clone());
            flow.insert(d.clone(), comp(w)?);
            angles.insert(d, Angle::ZERO);
        }
        for v in &p.order {
            order.push(comp(v)?);
            angles.insert(comp(v)?, p.angles[v]);
            order.push(dot(v, &p.flow[v])?);
        }
        let inputs = p.inputs.iter().map(comp).collect::<Result<_>>()?;
        let outputs = p.outputs.iter().map(comp).collect::<Result<_>>()?;
        MeasurementPattern::new(g, order, angles, flow, inputs, outputs)
    }

    /// Honest output of the computation pattern of `c` on `ψ_C`.
    pub fn expected_output(&self, c: &TrapColoring) -> Result<PureState> {
        let p = self.computation_pattern(c)?;
        let u = pattern_unitary(&p)?;
        let v = &u * nalgebra::DVector::from_vec(self.input.amplitudes().to_vec());
        PureState::from_amplitudes(p.outputs.clone(), v.as_slice().to_vec())
    }

    fn case<'a>(&'a self, ci: usize, pad: &'a TrapPad) -> Case<'a> {
        let mut slots = BTreeMap::new();
        for (k, v) in self.pattern.inputs.iter().enumerate() {
            for (i, q) in self.dtg.primary[v].iter().enumerate() {
                slots.insert(q.clone(), (k, i));
            }
        }
        let (p, want) = &self.computations[ci];
        Case { inst: self, c: &self.colorings[ci], pad, p, want, slots }
    }

    /// Exhaustive run over every colouring, pad and measurement branch with
    /// the server applying `attack` to its qubits before entangling.
    pub fn evaluate_full(&self, attack: &PauliString) -> Result<TrapEvaluation> {
        self.evaluate(attack, true)
    }

    /// Same statistics, simulating only the computation nodes. Traps are
    /// disentangled from everything but dummies, and dummies are measured in
    /// `Z`, so each trap passes independently with probability
    /// `|⟨ψ_t|σ_t|ψ_t⟩|²`.
    pub fn evaluate_fast(&self, attack: &PauliString) -> Result<TrapEvaluation> {
        self.evaluate(attack, false)
    }

    fn evaluate(&self, attack: &PauliString, full: bool) -> Result<TrapEvaluation> {
        for l in attack.support() {
            self.dtg.graph.index_of(l)?;
        }
        let pads = TrapPad::all(self.pattern.inputs.len());
        let cases: Vec<(usize, usize)> =
            (0..self.colorings.len()).flat_map(|c| (0..pads.len()).map(move |p| (c, p))).collect();
        let weight = 1.0 / cases.len() as f64;
        let parts: Vec<TrapEvaluation> =
            cases.par_iter().map(|&(c, p)| self.case(c, &pads[p]).run(attack, full)).collect::<Result<_>>()?;
        let total = parts.into_iter().fold(TrapEvaluation::empty(), TrapEvaluation::merge);
        Ok(TrapEvaluation { p_accept: total.p_accept * weight, p_fail: total.p_fail * weight, ..total })
    }
}

/// One colouring and pad.
struct Case<'a> {
    inst: &'a TrapInstance,
    c: &'a TrapColoring,
    pad: &'a TrapPad,
    p: &'a MeasurementPattern,
    want: &'a PureState,
    /// Input-row copy to (input index, copy index).
    slots: BTreeMap<QubitLabel, (usize, usize)>,
}

#[derive(Clone, Copy)]
enum Step<'s> {
    Dummy(&'s QubitLabel),
    Trap(&'s QubitLabel),
    Comp(&'s QubitLabel),
}

type Bits = BTreeMap<QubitLabel, u8>;

impl<'a> Case<'a> {
    fn theta(&self, q: &QubitLabel) -> Angle {
        self.slots.get(q).map_or(Angle::ZERO, |&(k, i)| self.pad.theta[k][i])
    }

    /// `X` pad bit, nonzero only on the slot carrying the input.
    fn a(&self, q: &QubitLabel) -> u8 {
        match self.slots.get(q) {
            Some(&(k, _)) if self.c.computation.contains(q) => self.pad.a[k],
            _ => 0,
        }
    }

    /// `Z` flips on `v` from dummy outcomes and from `X` pads of neighbours.
    fn z_flip(&self, v: &QubitLabel, dummies: &Bits) -> Result<u8> {
        let mut z = 0;
        for n in self.inst.dtg.graph.neighbors(v)? {
            z ^= dummies.get(&n).copied().unwrap_or(0) ^ self.a(&n);
        }
        Ok(z)
    }

    fn comp_delta(&self, v: &QubitLabel, outcomes: &OutcomeRecord) -> Angle {
        let alpha = self.p.adapted_angle(v, outcomes);
        (alpha + self.theta(v)).signed(self.a(v))
    }

    fn traps_hold(&self, traps: &Bits, dummies: &Bits) -> Result<bool> {
        for (t, &b) in traps {
            let want = self.inst.dtg.graph.neighbors(t)?.iter().fold(0, |x, d| x ^ dummies[d]);
            if b != want {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Gates, in order, that turn the received output into the honest one.
    fn output_gates(&self, o: &QubitLabel, outcomes: &OutcomeRecord, dummies: &Bits) -> Result<Vec<Gate>> {
        let (sx, sz) = self.p.corrections(o, outcomes);
        let mut g = Vec::new();
        if sz ^ self.z_flip(o, dummies)? == 1 {
            g.push(Gate::Z);
        }
        if sx == 1 {
            g.push(Gate::X);
        }
        if self.p.inputs.contains(o) {
            if self.a(o) == 1 {
                g.push(Gate::X);
            }
            g.push(Gate::Zrot(-self.theta(o)));
        }
        Ok(g)
    }

    fn steps(&self, full: bool) -> Vec<Step<'_>> {
        let mut s = Vec::new();
        if full {
            s.extend(self.c.dummies.iter().map(Step::Dummy));
            s.extend(self.c.traps.iter().map(Step::Trap));
        }
        s.extend(self.p.order.iter().map(Step::Comp));
        s
    }

    /// Server state before `E`, attack included.
    fn prepared(&self, nodes: &[QubitLabel], attack: &PauliString) -> Result<PureState> {
        let inputs: Vec<QubitLabel> = self.p.inputs.clone();
        let mut psi = self.inst.input.clone();
        for (from, to) in self.inst.pattern.inputs.iter().zip(&inputs) {
            psi.relabel(from, to.clone())?;
        }
        for q in &inputs {
            psi.apply_gate_mut(Gate::Zrot(self.theta(q)), std::slice::from_ref(q))?;
            if self.a(q) == 1 {
                psi.apply_gate_mut(Gate::X, std::slice::from_ref(q))?;
            }
        }
        let rest: Vec<PureState> = nodes
            .iter()
            .filter(|n| !inputs.contains(n))
            .map(|n| PureState::plus_angle(n.clone(), self.theta(n)))
            .collect();
        let mut s = psi.tensor(&PureState::tensor_all(&rest)?)?;
        s.apply_pauli_mut(&attack.restricted(|l| nodes.contains(l)))?;
        for (a, b) in self.inst.dtg.graph.edges() {
            if nodes.contains(&a) && nodes.contains(&b) {
                s.apply_gate_mut(Gate::CZ, &[a, b])?;
            }
        }
        Ok(s)
    }

    /// Probability that every trap passes, from the trap-local attack letters.
    fn trap_pass(&self, attack: &PauliString) -> Result<f64> {
        let mut p = 1.0;
        for t in &self.c.traps {
            let s = PureState::plus_angle(t.clone(), self.theta(t));
            p *= s.expectation(&PauliString::single(t.clone(), attack.get(t)))?.norm_sqr();
        }
        Ok(p)
    }

    fn run(&self, attack: &PauliString, full: bool) -> Result<TrapEvaluation> {
        let nodes: Vec<QubitLabel> =
            if full { self.inst.dtg.labels().to_vec() } else { self.p.graph.vertices().to_vec() };
        let state = self.prepared(&nodes, attack)?;
        let steps = self.steps(full);
        let mut walk = Walk {
            case: self,
            want: self.want,
            out: TrapEvaluation::empty(),
            dummies: Bits::new(),
            traps: Bits::new(),
            outcomes: OutcomeRecord::new(),
        };
        walk.go(state, 1.0, &steps)?;
        let mut out = walk.out;
        if !full {
            let pass = self.trap_pass(attack)?;
            out.p_accept *= pass;
            out.p_fail *= pass;
            if pass < 1e-12 {
                out.min_fidelity = 1.0;
            }
        }
        Ok(out)
    }
}

struct Walk<'c, 'a> {
    case: &'c Case<'a>,
    want: &'c PureState,
    out: TrapEvaluation,
    dummies: Bits,
    traps: Bits,
    outcomes: OutcomeRecord,
}

impl Walk<'_, '_> {
    fn go(&mut self, state: PureState, prob: f64, steps: &[Step<'_>]) -> Result<()> {
        let Some((step, rest)) = steps.split_first() else {
            return self.leaf(state, prob);
        };
        let case = self.case;
        let (label, branches) = match *step {
            Step::Dummy(d) => (d, state.measure_z(d)?),
            Step::Trap(t) => (t, state.measure_xy(t, case.theta(t))?),
            Step::Comp(v) => (v, state.measure_xy(v, case.comp_delta(v, &self.outcomes))?),
        };
        for b in branches {
            let Some(next) = b.state else { continue };
            match *step {
                Step::Dummy(_) => self.dummies.insert(label.clone(), b.outcome),
                Step::Trap(_) => self.traps.insert(label.clone(), b.outcome),
                Step::Comp(v) => {
                    let s = b.outcome ^ case.z_flip(v, &self.dummies)?;
                    self.outcomes.insert(label.clone(), s)
                }
            };
            self.go(next, prob * b.probability, rest)?;
        }
        match *step {
            Step::Dummy(_) => self.dummies.remove(label),
            Step::Trap(_) => self.traps.remove(label),
            Step::Comp(_) => self.outcomes.remove(label),
        };
        Ok(())
    }

    fn leaf(&mut self, mut state: PureState, prob: f64) -> Result<()> {
        let case = self.case;
        self.out.branches += 1;
        if !case.traps_hold(&self.traps, &self.dummies)? {
            self.out.rejected_branches += 1;
            return Ok(());
        }
        for o in &case.p.outputs {
            for g in case.output_gates(o, &self.outcomes, &self.dummies)? {
                state.apply_gate_mut(g, std::slice::from_ref(o))?;
            }
        }
        let f = state.reorder(&case.p.outputs)?.fidelity(self.want)?;
        self.out.p_accept += prob;
        self.out.p_fail += prob * (1.0 - f);
        self.out.min_fidelity = self.out.min_fidelity.min(f);
        Ok(())
    }
}

/// Receive-and-measure verification client. Pads the input, sends the
/// input row, receives the whole resource state and measures dummies in
/// `Z`, traps at their pad angle and the computation nodes adaptively.
pub struct TrapClient {
    inst: TrapInstance,
}

impl TrapClient {
    pub fn new(inst: TrapInstance) -> TrapClient {
        TrapClient { inst }
    }
}

impl Machine for TrapClient {
    fn name(&self) -> &str {
        "trap.client"
    }

    fn listens(&self) -> Vec<String> {
        vec![BLIND_CLIENT_IN.into(), TRAP_GRAPH.into()]
    }

    fn emits(&self) -> Vec<String> {
        vec![TRAP_INPUT.into(), BLIND_CLIENT_OUT.into()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        let inst = &self.inst;
        match cx.pc() {
            0 => {
                if !cx.has(BLIND_CLIENT_IN) {
                    return Ok(false);
                }
                let psi = cx.recv(BLIND_CLIENT_IN)?.qubits;
                if psi.len() != inst.pattern.inputs.len() {
                    return Err(DqcError::MalformedMessage(format!(
                        "expected {} input qubits",
                        inst.pattern.inputs.len()
                    )));
                }
                let ci = cx.choose(inst.colorings.len());
                let c = &inst.colorings[ci];
                let mut pad = TrapPad { a: vec![], theta: vec![] };
                let mut row = Vec::new();
                for (k, v) in inst.pattern.inputs.iter().enumerate() {
                    let a = cx.coin();
                    let mut th = [Angle::ZERO; 3];
                    for (i, copy) in inst.dtg.primary[v].iter().enumerate() {
                        th[i] = pad_angle(cx.choose(4));
                        let q = if c.computation.contains(copy) {
                            psi[k].clone()
                        } else {
                            let q = cx.label(copy.as_str());
                            cx.prepare(&PureState::plus(q.clone()))?;
                            q
                        };
                        cx.gate(Gate::Zrot(th[i]), std::slice::from_ref(&q))?;
                        if c.computation.contains(copy) && a == 1 {
                            cx.gate(Gate::X, std::slice::from_ref(&q))?;
                        }
                        row.push(q);
                    }
                    pad.a.push(a);
                    pad.theta.push(th);
                }
                cx.set("coloring", ci as i64);
                cx.set_list("a", pad.a.iter().map(|&x| x as i64).collect());
                cx.set_list("theta", pad.theta.iter().flatten().map(|t| t.k() as i64).collect());
                cx.send(TRAP_INPUT, Message::quantum("row", row))?;
                cx.set_pc(1);
                Ok(true)
            }
            1 => {
                if !cx.has(TRAP_GRAPH) {
                    return Ok(false);
                }
                let qs = cx.recv(TRAP_GRAPH)?.qubits;
                let labels = inst.dtg.labels();
                if qs.len() != labels.len() {
                    return Err(DqcError::MalformedMessage(format!(
                        "expected {} nodes, got {}",
                        labels.len(),
                        qs.len()
                    )));
                }
                let world: BTreeMap<&QubitLabel, &QubitLabel> = labels.iter().zip(&qs).collect();
                let ci = cx.get_or("coloring", 0) as usize;
                let c = &inst.colorings[ci];
                let th = cx.get_list("theta");
                let pad = TrapPad {
                    a: cx.get_list("a").iter().map(|&x| x as u8).collect(),
                    theta: th.chunks(3).map(|t| [Angle::new(t[0]), Angle::new(t[1]), Angle::new(t[2])]).collect(),
                };
                let case = inst.case(ci, &pad);
                let (mut dummies, mut traps, mut outcomes) = (Bits::new(), Bits::new(), OutcomeRecord::new());
                for d in &c.dummies {
                    dummies.insert(d.clone(), cx.measure_z(world[d])?);
                }
                for t in &c.traps {
                    traps.insert(t.clone(), cx.measure_xy(world[t], case.theta(t))?);
                }
                for v in &case.p.order {
                    let s = cx.measure_xy(world[v], case.comp_delta(v, &outcomes))?;
                    outcomes.insert(v.clone(), s ^ case.z_flip(v, &dummies)?);
                }
                if case.traps_hold(&traps, &dummies)? {
                    let mut out = Vec::new();
                    for o in &case.p.outputs {
                        for g in case.output_gates(o, &outcomes, &dummies)? {
                            cx.gate(g, std::slice::from_ref(world[o]))?;
                        }
                        out.push(world[o].clone());
                    }
                    cx.send(BLIND_CLIENT_OUT, Message::quantum("out", out))?;
                } else {
                    cx.send(BLIND_CLIENT_OUT, Message::classical("abort", vec![]))?;
                }
                cx.set_pc(2);
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

/// Receive-and-measure server: completes the resource state around the
/// input row, applies `attack` before entangling and sends every node in
/// `DT(G)` label order.
pub struct TrapServer {
    dtg: DottedTripleGraph,
    row: Vec<QubitLabel>,
    attack: PauliString,
}

impl TrapServer {
    pub fn new(inst: &TrapInstance, attack: PauliString) -> TrapServer {
        TrapServer { dtg: inst.dtg.clone(), row: inst.input_row(), attack }
    }
}

impl Machine for TrapServer {
    fn name(&self) -> &str {
        "trap.server"
    }

    fn listens(&self) -> Vec<String> {
        vec![TRAP_INPUT.into()]
    }

    fn emits(&self) -> Vec<String> {
        vec![TRAP_GRAPH.into()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        if cx.pc() != 0 || !cx.has(TRAP_INPUT) {
            return Ok(false);
        }
        let got = cx.recv(TRAP_INPUT)?.qubits;
        if got.len() != self.row.len() {
            return Err(DqcError::MalformedMessage(format!("expected {} input-row qubits", self.row.len())));
        }
        let mut world = BTreeMap::new();
        for l in self.dtg.labels() {
            let q = match self.row.iter().position(|r| r == l) {
                Some(i) => got[i].clone(),
                None => {
                    let q = cx.label(l.as_str());
                    cx.prepare(&PureState::plus(q.clone()))?;
                    q
                }
            };
            world.insert(l.clone(), q);
        }
        let mut attack = PauliString::identity();
        for (l, &p) in self.attack.letters() {
            let q = world.get(l).ok_or_else(|| DqcError::UnknownVertex(l.0.clone()))?;
            attack.set(q.clone(), p);
        }
        cx.pauli(&attack)?;
        for (a, b) in self.dtg.graph.edges() {
            cx.gate(Gate::CZ, &[world[&a].clone(), world[&b].clone()])?;
        }
        let out = self.dtg.labels().iter().map(|l| world[l].clone()).collect();
        cx.send(TRAP_GRAPH, Message::quantum("graph", out))?;
        cx.set_pc(1);
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acframework::{delivered_fidelity, System, World};
    use crate::qstate::Pauli;
    use num_complex::Complex64;

    fn psi(label: &str) -> PureState {
        PureState::single(label, Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap()
    }

    fn single_vertex() -> TrapInstance {
        TrapInstance::new(MeasurementPattern::identity(), psi("1")).unwrap()
    }

    fn single_edge() -> TrapInstance {
        TrapInstance::new(MeasurementPattern::j_chain(&[Angle::new(3)]), psi("1")).unwrap()
    }

    #[test]
    fn pads_enumerate_128_per_input() {
        let all = TrapPad::all(1);
        assert_eq!(all.len(), 128);
        let distinct: std::collections::BTreeSet<String> = all.iter().map(|p| format!("{p:?}")).collect();
        assert_eq!(distinct.len(), 128);
    }

    #[test]
    fn computation_pattern_is_a_three_node_chain() {
        let inst = single_edge();
        for c in inst.colorings() {
            let p = inst.computation_pattern(c).unwrap();
            assert_eq!(p.graph.num_vertices(), 3);
            assert_eq!(p.order.len(), 2);
            assert!(p.graph.vertices().iter().all(|v| c.computation.contains(v)));
        }
    }

    #[test]
    fn honest_single_vertex_is_exact() {
        let e = single_vertex().evaluate_full(&PauliString::identity()).unwrap();
        assert!((e.p_accept - 1.0).abs() < 1e-10);
        assert!(e.p_fail.abs() < 1e-10);
        assert!(e.min_fidelity > 1.0 - 1e-10);
        assert_eq!(e.rejected_branches, 0);
        assert_eq!(e.branches, 6 * 128 * 2);
    }

    #[test]
    fn fast_matches_full_on_single_vertex_attacks() {
        let inst = single_vertex();
        let labels = inst.dtg.labels().to_vec();
        for l in &labels {
            for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                let a = PauliString::single(l.clone(), p);
                let (f, s) = (inst.evaluate_full(&a).unwrap(), inst.evaluate_fast(&a).unwrap());
                assert!((f.p_accept - s.p_accept).abs() < 1e-10, "{a}");
                assert!((f.p_fail - s.p_fail).abs() < 1e-10, "{a}");
            }
        }
    }

    #[test]
    fn fast_matches_full_on_single_edge_samples() {
        let inst = single_edge();
        let attacks = ["1:1 X", "1:0~2:1 Z"];
        for spec in attacks {
            let (l, p) = spec.split_once(' ').unwrap();
            let a = PauliString::single(QubitLabel::new(l), Pauli::from_char(p.chars().next().unwrap()).unwrap());
            let (f, s) = (inst.evaluate_full(&a).unwrap(), inst.evaluate_fast(&a).unwrap());
            assert!((f.p_accept - s.p_accept).abs() < 1e-10, "{a}: {f:?} {s:?}");
            assert!((f.p_fail - s.p_fail).abs() < 1e-10, "{a}: {f:?} {s:?}");
        }
    }

    #[test]
    fn z_on_a_trap_copy_is_caught_when_it_is_a_trap() {
        let inst = single_edge();
        let a = PauliString::single(QubitLabel::new("2:0"), Pauli::Z);
        let e = inst.evaluate_fast(&a).unwrap();
        assert!((e.p_accept - 2.0 / 3.0).abs() < 1e-10, "{e:?}");
    }

    #[test]
    fn engine_run_matches_on_single_vertex() {
        let inst = single_vertex();
        let want = psi("1");
        for attack in [PauliString::identity(), PauliString::single(QubitLabel::new("1:1"), Pauli::Z)] {
            let sys = System::compose(vec![
                System::single(TrapClient::new(inst.clone())),
                System::single(TrapServer::new(&inst, attack.clone())),
            ])
            .unwrap();
            let mut w = World::new();
            let input = PureState::single("in", want.amplitudes()[0], want.amplitudes()[1]).unwrap();
            w.add_state(&input).unwrap();
            w.inject(BLIND_CLIENT_IN, Message::quantum("psi", vec!["in".into()]));
            let (mut accept, mut fail) = (0.0, 0.0);
            for w in sys.enumerate(w).unwrap() {
                let m = &w.outputs[BLIND_CLIENT_OUT][0];
                if m.tag == "out" {
                    let f = delivered_fidelity(&w.state.reduced(&m.qubits).unwrap(), &want).unwrap();
                    accept += w.prob;
                    fail += w.prob * (1.0 - f);
                    if attack.is_identity() {
                        assert!(f > 1.0 - 1e-10, "fidelity {f}");
                    }
                }
            }
            let direct = inst.evaluate_full(&attack).unwrap();
            assert!((accept - direct.p_accept).abs() < 1e-10, "{attack}: {accept} vs {direct:?}");
            assert!((fail - direct.p_fail).abs() < 1e-10, "{attack}: {fail} vs {direct:?}");
        }
    }
}
