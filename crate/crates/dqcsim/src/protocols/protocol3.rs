use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stab::{
    load_node, pattern_test, ps_decode, ps_delta, ps_prepare, store_nodes, Offsets, PsNode, StabServer, StabTest,
    STAB_DELTA, STAB_QUBITS, STAB_RESULT,
};
use crate::acframework::{Cx, Machine, Message, System};
use crate::error::{DqcError, Result};
use crate::graphstate::{find_two_coloring, TwoColoring};
use crate::mbqc::{adapt_angle, pattern_branches, MeasurementPattern, OutcomeRecord};
use crate::qstate::{Angle, PureState};

pub const P3_OUTPUT: &str = "p3.out";

/// Kind of one round of the verified computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RoundKind {
    /// Black nodes in `Z`, white nodes blind in `X`.
    T1,
    /// Colours swapped.
    T2,
    /// The computation.
    C,
}

/// Secret partition of the `2k + 1` rounds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabRoundPlan {
    pub rounds: Vec<RoundKind>,
}

impl StabRoundPlan {
    pub fn new(rounds: Vec<RoundKind>) -> Result<StabRoundPlan> {
        let count = |k| rounds.iter().filter(|&&r| r == k).count();
        let (t1, t2, c) = (count(RoundKind::T1), count(RoundKind::T2), count(RoundKind::C));
        if c != 1 || t1 != t2 {
            return Err(DqcError::Precondition(format!("plan needs T1 = T2 and one C, got {t1}/{t2}/{c}")));
        }
        Ok(StabRoundPlan { rounds })
    }

    pub fn k(&self) -> usize {
        self.rounds.len() / 2
    }

    pub fn computation_round(&self) -> usize {
        self.rounds.iter().position(|&r| r == RoundKind::C).expect("one C round")
    }

    /// Every plan for `k`, in lexicographic order.
    pub fn all(k: usize) -> Vec<StabRoundPlan> {
        fn walk(left: [usize; 3], cur: &mut Vec<RoundKind>, out: &mut Vec<StabRoundPlan>) {
            if left == [0, 0, 0] {
                out.push(StabRoundPlan { rounds: cur.clone() });
                return;
            }
            for (i, kind) in [RoundKind::T1, RoundKind::T2, RoundKind::C].into_iter().enumerate() {
                if left[i] > 0 {
                    let mut l = left;
                    l[i] -= 1;
                    cur.push(kind);
                    walk(l, cur, out);
                    cur.pop();
                }
            }
        }
        let mut out = Vec::new();
        walk([k, k, 1], &mut Vec::new(), &mut out);
        out
    }
}

/// Output distribution of the computation: inputs `Z^x|+⟩`, the pattern,
/// then every output measured in `X`. Keys follow `p.outputs`.
pub fn protocol3_oracle(p: &MeasurementPattern, x: &[u8]) -> Result<BTreeMap<Vec<u8>, f64>> {
    let input = classical_input(p, x)?;
    let mut dist = BTreeMap::new();
    for b in pattern_branches(p, &input)? {
        let mut stack = vec![(b.output, b.probability, Vec::new())];
        while let Some((s, prob, bits)) = stack.pop() {
            let Some(v) = p.outputs.get(bits.len()) else {
                *dist.entry(bits).or_insert(0.0) += prob;
                continue;
            };
            for m in s.measure_xy(v, Angle::ZERO)? {
                if let Some(next) = m.state {
                    let mut bits = bits.clone();
                    bits.push(m.outcome);
                    stack.push((next, prob * m.probability, bits));
                }
            }
        }
    }
    dist.retain(|_, p| *p > 1e-12);
    Ok(dist)
}

fn classical_input(p: &MeasurementPattern, x: &[u8]) -> Result<PureState> {
    if x.len() != p.inputs.len() {
        return Err(DqcError::Precondition(format!("{} input bits for {} inputs", x.len(), p.inputs.len())));
    }
    let parts: Vec<PureState> =
        p.inputs.iter().zip(x).map(|(v, &b)| PureState::plus_angle(v.clone(), Angle::pi_times(b))).collect();
    PureState::tensor_all(&parts)
}

/// Client of the verified computation on a two-colourable graph: `2k` test
/// rounds and one computation round with classical input `x`, all outputs
/// measured in `X`. Sends `output` with `o` if every test accepted, else
/// `abort`.
pub struct Protocol3Client {
    pattern: MeasurementPattern,
    x: Vec<u8>,
    k: usize,
    tests: [StabTest; 2],
    plan: Option<StabRoundPlan>,
}

impl Protocol3Client {
    pub fn new(pattern: MeasurementPattern, x: Vec<u8>, k: usize) -> Result<Protocol3Client> {
        pattern.validate()?;
        classical_input(&pattern, &x)?;
        let coloring: TwoColoring = find_two_coloring(&pattern.graph)
            .map_err(|e| DqcError::Precondition(format!("graph is not two-colourable: {e:?}")))?;
        let tests = [pattern_test(&pattern.graph, &coloring, false)?, pattern_test(&pattern.graph, &coloring, true)?];
        Ok(Protocol3Client { pattern, x, k, tests, plan: None })
    }

    /// Fix the round plan instead of drawing it.
    pub fn with_plan(mut self, plan: StabRoundPlan) -> Result<Protocol3Client> {
        if plan.k() != self.k {
            return Err(DqcError::Precondition(format!("plan has k = {}, client k = {}", plan.k(), self.k)));
        }
        self.plan = Some(plan);
        Ok(self)
    }

    pub fn rounds(&self) -> usize {
        2 * self.k + 1
    }

    fn order(&self, kind: RoundKind) -> Vec<usize> {
        let g = &self.pattern.graph;
        match kind {
            RoundKind::C => {
                let p = &self.pattern;
                p.order.iter().chain(&p.outputs).map(|v| g.index_of(v).expect("pattern vertex")).collect()
            }
            _ => (0..g.num_vertices()).collect(),
        }
    }

    fn test(&self, kind: RoundKind) -> &StabTest {
        &self.tests[usize::from(kind == RoundKind::T2)]
    }

    fn outcomes(&self, cx: &Cx<'_>) -> OutcomeRecord {
        let s = cx.get_list("s");
        self.pattern
            .graph
            .vertices()
            .iter()
            .zip(s)
            .filter(|(_, b)| *b >= 0)
            .map(|(v, b)| (v.clone(), (b & 1) as u8))
            .collect()
    }

    fn start_round(&self, cx: &mut Cx<'_>, round: usize, kind: RoundKind) -> Result<()> {
        let g = &self.pattern.graph;
        let mut nodes = Vec::new();
        for (i, v) in g.vertices().iter().enumerate() {
            let q = cx.label(&format!("t{round}n{i}"));
            let node = match kind {
                RoundKind::C => {
                    let theta = cx.angle_any();
                    let x = self.pattern.inputs.iter().position(|w| w == v).map_or(0, |j| self.x[j]);
                    cx.prepare(&PureState::plus_angle(q.clone(), theta + Angle::pi_times(x)))?;
                    PsNode { theta, ..PsNode::default() }
                }
                _ => ps_prepare(cx, &q, self.test(kind).prep[i], Offsets::HalfCircle)?,
            };
            nodes.push(node);
            cx.send(STAB_QUBITS, Message::quantum("node", vec![q]).with_values(vec![i as i64, round as i64]))?;
        }
        store_nodes(cx, &nodes);
        cx.set_list("s", vec![-1; g.num_vertices()]);
        Ok(())
    }

    fn send_delta(&self, cx: &mut Cx<'_>, round: usize, kind: RoundKind, i: usize) -> Result<()> {
        let node = load_node(cx, i);
        let (delta, flip) = match kind {
            RoundKind::C => {
                let v = &self.pattern.graph.vertices()[i];
                let phi = self.pattern.angles.get(v).copied().unwrap_or(Angle::ZERO);
                let (sx, sz) = self.pattern.corrections(v, &self.outcomes(cx));
                let r = cx.coin();
                (adapt_angle(phi, sx, sz) + node.theta + Angle::pi_times(r), r)
            }
            _ => ps_delta(cx, self.test(kind).prep[i], node),
        };
        cx.set("flip", flip as i64);
        cx.send(STAB_DELTA, Message::classical("delta", vec![i as i64, delta.k() as i64, round as i64]))
    }

    fn take_result(&self, cx: &mut Cx<'_>, kind: RoundKind, i: usize) -> Result<()> {
        let s = (cx.recv(STAB_RESULT)?.value(0)? & 1) as u8;
        let flip = (cx.get_or("flip", 0) & 1) as u8;
        let bit = match kind {
            RoundKind::C => s ^ flip,
            _ => ps_decode(self.test(kind).prep[i], load_node(cx, i), s, flip),
        };
        let mut l = cx.get_list("s");
        l[i] = bit as i64;
        cx.set_list("s", l);
        Ok(())
    }

    fn finish_round(&self, cx: &mut Cx<'_>, kind: RoundKind) {
        let s = cx.get_list("s");
        match kind {
            RoundKind::C => {
                let g = &self.pattern.graph;
                let o = self.pattern.outputs.iter().map(|v| s[g.index_of(v).expect("output")]).collect();
                cx.set_list("o", o);
            }
            _ => {
                let bits: Vec<u8> = s.iter().map(|&b| (b & 1) as u8).collect();
                if !self.test(kind).accepts(&bits) {
                    cx.set("fail", 1);
                }
            }
        }
    }
}

impl Machine for Protocol3Client {
    fn name(&self) -> &str {
        "p3.client"
    }

    fn listens(&self) -> Vec<String> {
        vec![STAB_RESULT.into()]
    }

    fn emits(&self) -> Vec<String> {
        vec![STAB_QUBITS.into(), STAB_DELTA.into(), P3_OUTPUT.into()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        let n = self.pattern.graph.num_vertices() as i64;
        if cx.pc() == 0 {
            let plan = match &self.plan {
                Some(p) => p.clone(),
                None => {
                    let mut all = StabRoundPlan::all(self.k);
                    let pick = cx.choose(all.len());
                    all.swap_remove(pick)
                }
            };
            cx.set_list("plan", plan.rounds.iter().map(|&r| r as i64).collect());
            cx.set_pc(1);
            return Ok(true);
        }
        let round = cx.get_or("round", 0) as usize;
        if round == self.rounds() {
            if cx.pc() != 1 {
                return Ok(false);
            }
            let msg = if cx.get_or("fail", 0) == 1 {
                Message::classical("abort", vec![])
            } else {
                Message::classical("output", cx.get_list("o"))
            };
            cx.send(P3_OUTPUT, msg)?;
            cx.set_pc(2);
            return Ok(true);
        }
        let kind = [RoundKind::T1, RoundKind::T2, RoundKind::C][cx.get_list("plan")[round] as usize];
        let phase = cx.get_or("phase", 0);
        if phase == 0 {
            self.start_round(cx, round, kind)?;
        } else if phase <= 2 * n {
            let i = self.order(kind)[((phase - 1) / 2) as usize];
            if phase % 2 == 1 {
                self.send_delta(cx, round, kind, i)?;
            } else {
                if !cx.has(STAB_RESULT) {
                    return Ok(false);
                }
                self.take_result(cx, kind, i)?;
            }
        } else {
            self.finish_round(cx, kind);
            cx.set("round", round as i64 + 1);
            cx.set("phase", 0);
            return Ok(true);
        }
        cx.set("phase", phase + 1);
        Ok(true)
    }
}

/// Honest client and server of the verified computation.
pub fn protocol3_system(client: Protocol3Client) -> Result<System> {
    let server = StabServer::new(client.pattern.graph.clone()).with_rounds(client.rounds());
    System::compose(vec![System::single(client), System::single(server)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acframework::{distinguishability, OpenInput, Sink, World};
    use crate::graphstate::Graph;
    use crate::protocols::stab::{StabPsClient, STAB_ACCEPT};
    use crate::qstate::QubitLabel;

    fn grid_pattern() -> MeasurementPattern {
        grid_with(3, 6)
    }

    fn grid_with(a: i64, b: i64) -> MeasurementPattern {
        let angles = [("r0c0", a), ("r1c0", b)].iter().map(|(v, a)| (QubitLabel::new(*v), Angle::new(*a))).collect();
        MeasurementPattern::grid(2, 2, angles).unwrap()
    }

    fn output_of(w: &World) -> &Message {
        &w.outputs[P3_OUTPUT][0]
    }

    #[test]
    fn plans_cover_every_partition() {
        assert_eq!(StabRoundPlan::all(1).len(), 6);
        assert_eq!(StabRoundPlan::all(2).len(), 30);
        for k in 1..=3 {
            let all = StabRoundPlan::all(k);
            let mut at = vec![0usize; 2 * k + 1];
            for p in &all {
                assert_eq!(StabRoundPlan::new(p.rounds.clone()).unwrap(), *p);
                at[p.computation_round()] += 1;
            }
            assert!(at.iter().all(|&c| c == at[0]), "{at:?}");
        }
        assert!(StabRoundPlan::new(vec![RoundKind::T1, RoundKind::T1, RoundKind::C]).is_err());
    }

    #[test]
    fn computation_slot_is_uniform_over_seeds() {
        let p = MeasurementPattern::j_chain(&[Angle::new(2)]);
        let mut at = [0usize; 3];
        for seed in 0..300 {
            let sys = protocol3_system(Protocol3Client::new(p.clone(), vec![0], 1).unwrap()).unwrap();
            let w = sys.sample(World::new().sampling(seed)).unwrap();
            let plan = w.memory_of("p3.client").unwrap().values["plan"].clone();
            at[plan.iter().position(|&r| r == RoundKind::C as i64).unwrap()] += 1;
        }
        assert!(at.iter().all(|&c| (70..=130).contains(&c)), "{at:?}");
    }

    #[test]
    fn honest_grid_accepts_with_oracle_outputs() {
        for (p, x) in [(grid_with(0, 0), vec![1, 0]), (grid_with(0, 0), vec![1, 1]), (grid_with(4, 0), vec![1, 1])] {
            let support = protocol3_oracle(&p, &x).unwrap();
            assert!(support.len() < 4);
            for seed in 0..40 {
                let sys = protocol3_system(Protocol3Client::new(p.clone(), x.clone(), 1).unwrap()).unwrap();
                let w = sys.sample(World::new().sampling(seed)).unwrap();
                let m = output_of(&w);
                assert_eq!(m.tag, "output");
                let o: Vec<u8> = m.classical.iter().map(|&b| b as u8).collect();
                assert!(support.contains_key(&o), "x {x:?} o {o:?} not in {support:?}");
            }
        }
    }

    #[test]
    fn computation_round_reproduces_the_oracle_exactly() {
        let p = MeasurementPattern::j_chain(&[Angle::new(3)]);
        for x in [0u8, 1] {
            let want = protocol3_oracle(&p, &[x]).unwrap();
            let plan = StabRoundPlan::new(vec![RoundKind::C]).unwrap();
            let client = Protocol3Client::new(p.clone(), vec![x], 0).unwrap().with_plan(plan).unwrap();
            let mut got: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
            for w in protocol3_system(client).unwrap().enumerate(World::new()).unwrap() {
                let o = output_of(&w).classical.iter().map(|&b| b as u8).collect();
                *got.entry(o).or_insert(0.0) += w.prob;
            }
            for (o, pw) in &want {
                assert!((got.get(o).copied().unwrap_or(0.0) - pw).abs() < 1e-10, "{o:?}");
            }
            assert!((got.values().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn flipped_x_result_in_a_test_round_aborts() {
        let p = grid_pattern();
        let coloring = find_two_coloring(&p.graph).unwrap();
        let plan = StabRoundPlan::new(vec![RoundKind::T1, RoundKind::C, RoundKind::T2]).unwrap();
        for (i, v) in p.graph.vertices().iter().enumerate() {
            let x_in_t1 = coloring.white.contains(v);
            for seed in 0..5 {
                let client = Protocol3Client::new(p.clone(), vec![0, 1], 1).unwrap().with_plan(plan.clone()).unwrap();
                let server = StabServer::new(p.graph.clone()).with_rounds(3).with_flip(0, i);
                let sys = System::compose(vec![System::single(client), System::single(server)]).unwrap();
                let w = sys.sample(World::new().sampling(seed)).unwrap();
                assert_eq!(output_of(&w).tag == "abort", x_in_t1, "node {v}");
            }
        }
    }

    #[test]
    fn flipped_result_fails_the_test_round_on_every_branch() {
        let g = Graph::path(3);
        let coloring = find_two_coloring(&g).unwrap();
        for x_black in [false, true] {
            let t = pattern_test(&g, &coloring, x_black).unwrap();
            for (i, v) in g.vertices().iter().enumerate() {
                let sys = System::compose(vec![
                    System::single(StabPsClient::new(t.clone(), Offsets::HalfCircle)),
                    System::single(StabServer::new(g.clone()).with_flip(0, i)),
                ])
                .unwrap();
                let caught = coloring.black.contains(v) == x_black;
                for w in sys.enumerate(World::new()).unwrap() {
                    assert_eq!(w.outputs[STAB_ACCEPT][0].classical[0] == 0, caught, "node {v}");
                }
            }
        }
    }

    #[test]
    fn test_rounds_look_alike_to_the_server() {
        let g = Graph::path(3);
        let coloring = find_two_coloring(&g).unwrap();
        let view = |x_black| {
            let t = pattern_test(&g, &coloring, x_black).unwrap();
            System::compose(vec![
                System::single(StabPsClient::new(t, Offsets::HalfCircle)),
                System::single(Sink::new(STAB_ACCEPT)),
            ])
            .unwrap()
        };
        let outs = vec![STAB_QUBITS.to_string(), STAB_DELTA.to_string()];
        let probes: Vec<_> = (0..8i64)
            .map(|m| (0..3).map(|i| OpenInput::classical(STAB_RESULT, "s", vec![m >> i & 1])).collect())
            .collect();
        let d = distinguishability(&view(false), &outs, &view(true), &outs, &probes).unwrap();
        assert!(d.exact, "ε = {}", d.epsilon);
    }
}
