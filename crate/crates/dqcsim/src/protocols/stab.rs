use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::acframework::{Cx, Machine, Message};
use crate::error::{DqcError, Result};
use crate::graphstate::{graph_state, stabilizer_element, Graph, TwoColoring};
use crate::qstate::{Angle, Gate, Pauli, PauliString, PureState, QubitLabel};

pub const STAB_QUBITS: &str = "stab.q";
pub const STAB_DELTA: &str = "stab.delta";
pub const STAB_RESULT: &str = "stab.s";
pub const STAB_ACCEPT: &str = "stab.accept";
pub const STAB_RM_QUBITS: &str = "stab.rm.q";
pub const STAB_RM_FLIPS: &str = "stab.rm.s";

/// How a node is prepared in the prepare-and-send test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrepInstruction {
    /// `+1` eigenstate of `X` or `Y`, measured blindly in `X`.
    PlusEigenstate(Pauli),
    /// `|r⟩` with a fresh random `r`.
    ZBasis,
    /// Maximally mixed, realised as an equal mixture of `|+⟩` and `|−⟩`.
    MaxMixed,
}

impl PrepInstruction {
    /// Letter the receive-and-measure client measures on this node.
    pub fn letter(self) -> Pauli {
        match self {
            PrepInstruction::PlusEigenstate(p) => p,
            PrepInstruction::ZBasis => Pauli::Z,
            PrepInstruction::MaxMixed => Pauli::I,
        }
    }
}

/// Parity of the listed node bits, expected to equal `flip`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityCheck {
    pub nodes: Vec<QubitLabel>,
    pub flip: u8,
}

/// Per-node preparation plus the parity checks that decide acceptance.
#[derive(Clone, Debug, PartialEq)]
pub struct StabTest {
    pub graph: Graph,
    /// In vertex order.
    pub prep: Vec<PrepInstruction>,
    pub checks: Vec<ParityCheck>,
}

impl StabTest {
    fn prep_of(&self, v: &QubitLabel) -> PrepInstruction {
        self.prep[self.graph.index_of(v).expect("test vertex")]
    }

    /// True iff every check holds for the bit assignment (vertex order).
    pub fn accepts(&self, bits: &[u8]) -> bool {
        self.checks.iter().all(|c| {
            let p = c.nodes.iter().fold(c.flip, |a, v| a ^ bits[self.graph.index_of(v).expect("test vertex")]);
            p == 0
        })
    }
}

/// Offsets hiding the measurement angles of blind `X` measurements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Offsets {
    /// `θ ∈ {0, π}`.
    Flips,
    /// `θ ∈ A`.
    HalfCircle,
}

impl Offsets {
    pub fn angles(self) -> Vec<Angle> {
        match self {
            Offsets::Flips => vec![Angle::ZERO, Angle::PI],
            Offsets::HalfCircle => Angle::half_circle().collect(),
        }
    }

    fn sample(self, cx: &mut Cx<'_>) -> Angle {
        match self {
            Offsets::Flips => Angle::pi_times(cx.coin()),
            Offsets::HalfCircle => cx.angle_a(),
        }
    }
}

/// Prepare-and-send test for one stabilizer element: `X`/`Y` nodes in the
/// `+1` eigenstate, `Z` nodes in `|r⟩`, identity nodes maximally mixed;
/// accept iff the decoded outcomes and the `Z` bits have the element's parity.
pub fn stab_to_ps(g: &Graph, stab: &PauliString) -> Result<StabTest> {
    if stab.is_identity() {
        return Err(DqcError::Precondition("the identity element tests nothing".into()));
    }
    for v in stab.support() {
        g.index_of(v)?;
    }
    let w: BTreeSet<QubitLabel> = stab.letters().iter().filter(|(_, p)| p.has_x()).map(|(v, _)| v.clone()).collect();
    let element = stabilizer_element(g, &w)?;
    if element.letters() != stab.letters() {
        return Err(DqcError::NotStabilizer(format!("{stab} has the wrong letters")));
    }
    if element.phase_power() & 1 == 1 || element.phase_power() != stab.phase_power() {
        return Err(DqcError::NotStabilizer(format!("{stab} has the wrong sign")));
    }
    let prep = g
        .vertices()
        .iter()
        .map(|v| match stab.get(v) {
            Pauli::I => PrepInstruction::MaxMixed,
            Pauli::Z => PrepInstruction::ZBasis,
            p => PrepInstruction::PlusEigenstate(p),
        })
        .collect();
    let nodes = g.vertices().iter().filter(|v| stab.get(v) != Pauli::I).cloned().collect();
    let flip = u8::from(stab.phase_power() == 2);
    Ok(StabTest { graph: g.clone(), prep, checks: vec![ParityCheck { nodes, flip }] })
}

/// Two-colouring pattern: `x_nodes` measured in `X`, the rest in `Z`, one
/// generator check per `X` node. `x_nodes` must be one colour class.
pub fn pattern_test(g: &Graph, coloring: &TwoColoring, x_black: bool) -> Result<StabTest> {
    if !coloring.is_valid_for(g) {
        return Err(DqcError::Precondition("colouring is not proper for the graph".into()));
    }
    let x_nodes = if x_black { &coloring.black } else { &coloring.white };
    let prep = g
        .vertices()
        .iter()
        .map(|v| if x_nodes.contains(v) { PrepInstruction::PlusEigenstate(Pauli::X) } else { PrepInstruction::ZBasis })
        .collect();
    let mut checks = Vec::new();
    for v in g.vertices().iter().filter(|v| x_nodes.contains(*v)) {
        let mut nodes = vec![v.clone()];
        nodes.extend(g.neighbors(v)?);
        checks.push(ParityCheck { nodes, flip: 0 });
    }
    Ok(StabTest { graph: g.clone(), prep, checks })
}

/// Node bits and where they come from during exact evaluation.
#[derive(Clone, Copy)]
enum Read {
    /// Measure at this angle; the bit is the outcome xor `mask`.
    Xy(Angle, u8),
    Z,
}

/// Probability that some check fails, measuring `reads` one by one.
fn reject_probability(state: &PureState, test: &StabTest, reads: &[(usize, Read)], bits: &mut Vec<u8>) -> Result<f64> {
    let Some(((i, read), rest)) = reads.split_first() else {
        return Ok(if test.accepts(bits) { 0.0 } else { 1.0 });
    };
    let label = &test.graph.vertices()[*i];
    let (branches, mask) = match read {
        Read::Xy(a, m) => (state.measure_xy(label, *a)?, *m),
        Read::Z => (state.measure_z(label)?, 0),
    };
    let mut p = 0.0;
    for b in branches {
        if let Some(s) = b.state {
            let old = bits[*i];
            bits[*i] = b.outcome ^ mask;
            p += b.probability * reject_probability(&s, test, rest, bits)?;
            bits[*i] = old;
        }
    }
    Ok(p)
}

/// Detection probability of the receive-and-measure test when the server
/// applies `attack` to the graph state before sending it.
pub fn rm_detection(test: &StabTest, attack: &PauliString) -> Result<f64> {
    let g = &test.graph;
    let state = graph_state(g)?.apply_pauli(attack)?;
    let reads: Vec<(usize, Read)> = test
        .prep
        .iter()
        .enumerate()
        .filter_map(|(i, p)| match p.letter() {
            Pauli::X => Some((i, Read::Xy(Angle::ZERO, 0))),
            Pauli::Y => Some((i, Read::Xy(Angle::new(4), 0))),
            Pauli::Z => Some((i, Read::Z)),
            Pauli::I => None,
        })
        .collect();
    reject_probability(&state, test, &reads, &mut vec![0; g.num_vertices()])
}

/// Per-node client randomness of the prepare-and-send test.
#[derive(Clone, Copy)]
struct NodeDraw {
    state: Angle,
    z: Option<u8>,
    read: Option<Read>,
}

fn node_draws(p: PrepInstruction, offsets: &[Angle]) -> Vec<NodeDraw> {
    let mut v = Vec::new();
    match p {
        PrepInstruction::PlusEigenstate(sigma) => {
            let base = if sigma == Pauli::Y { Angle::new(4) } else { Angle::ZERO };
            for &theta in offsets {
                for hidden in 0..2u8 {
                    for flip in 0..2u8 {
                        v.push(NodeDraw {
                            state: theta + base + Angle::pi_times(hidden),
                            z: None,
                            read: Some(Read::Xy(theta + Angle::pi_times(flip), flip ^ hidden)),
                        });
                    }
                }
            }
        }
        PrepInstruction::ZBasis => {
            for r in 0..2u8 {
                v.push(NodeDraw { state: Angle::ZERO, z: Some(r), read: None });
            }
        }
        PrepInstruction::MaxMixed => {
            for s in 0..2u8 {
                v.push(NodeDraw { state: Angle::pi_times(s), z: None, read: None });
            }
        }
    }
    v
}

/// Detection probability of the prepare-and-send test when the server
/// applies `attack` to the received qubits before entangling, averaged
/// exactly over all client randomness.
///
/// Nodes whose outcome the client ignores (`Z` and identity nodes) are traced
/// out instead of measured; their angles then play no role.
pub fn ps_detection(test: &StabTest, attack: &PauliString, offsets: Offsets) -> Result<f64> {
    let g = &test.graph;
    let offs = offsets.angles();
    let draws: Vec<Vec<NodeDraw>> = test.prep.iter().map(|&p| node_draws(p, &offs)).collect();
    let total: usize = draws.iter().map(Vec::len).product();
    let mut p = 0.0;
    for mut idx in 0..total {
        let mut pick = Vec::with_capacity(draws.len());
        for d in &draws {
            pick.push(d[idx % d.len()]);
            idx /= d.len();
        }
        let singles: Vec<PureState> = g
            .vertices()
            .iter()
            .zip(&pick)
            .map(|(v, d)| match d.z {
                Some(r) => PureState::z_basis(v.clone(), r),
                None => PureState::plus_angle(v.clone(), d.state),
            })
            .collect();
        let mut state = PureState::tensor_all(&singles)?;
        state.apply_pauli_mut(attack)?;
        for (a, b) in g.edges() {
            state.apply_gate_mut(Gate::CZ, &[a, b])?;
        }
        let mut bits: Vec<u8> = pick.iter().map(|d| d.z.unwrap_or(0)).collect();
        let reads: Vec<(usize, Read)> = pick.iter().enumerate().filter_map(|(i, d)| d.read.map(|r| (i, r))).collect();
        p += reject_probability(&state, test, &reads, &mut bits)?;
    }
    Ok(p / total as f64)
}

fn one(q: &QubitLabel) -> &[QubitLabel] {
    std::slice::from_ref(q)
}

pub(crate) fn accept_message(test: &StabTest, bits: &[i64]) -> Message {
    let b: Vec<u8> = bits.iter().map(|&x| (x & 1) as u8).collect();
    Message::classical("accept", vec![i64::from(test.accepts(&b))])
}

/// Client record for one node of a prepare-and-send test round.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct PsNode {
    pub theta: Angle,
    pub hidden: u8,
    pub bit: u8,
}

/// Prepares node `q` per `prep` in the client's workspace.
pub(crate) fn ps_prepare(cx: &mut Cx<'_>, q: &QubitLabel, prep: PrepInstruction, offsets: Offsets) -> Result<PsNode> {
    let mut node = PsNode::default();
    let s = match prep {
        PrepInstruction::PlusEigenstate(sigma) => {
            node.theta = offsets.sample(cx);
            node.hidden = cx.coin();
            let base = if sigma == Pauli::Y { Angle::new(4) } else { Angle::ZERO };
            PureState::plus_angle(q.clone(), node.theta + base + Angle::pi_times(node.hidden))
        }
        PrepInstruction::ZBasis => {
            node.bit = cx.coin();
            PureState::z_basis(q.clone(), node.bit)
        }
        PrepInstruction::MaxMixed => {
            node.theta = offsets.sample(cx);
            let s = cx.coin();
            PureState::plus_angle(q.clone(), node.theta + Angle::pi_times(s))
        }
    };
    cx.prepare(&s)?;
    Ok(node)
}

/// Masked angle for a node and the announced flip it carries.
pub(crate) fn ps_delta(cx: &mut Cx<'_>, prep: PrepInstruction, node: PsNode) -> (Angle, u8) {
    match prep {
        PrepInstruction::ZBasis => (cx.angle_any(), 0),
        _ => {
            let r = cx.coin();
            (node.theta + Angle::pi_times(r), r)
        }
    }
}

/// Bit of a node once the server reported `s`.
pub(crate) fn ps_decode(prep: PrepInstruction, node: PsNode, s: u8, flip: u8) -> u8 {
    match prep {
        PrepInstruction::PlusEigenstate(_) => s ^ flip ^ node.hidden,
        _ => node.bit,
    }
}

pub(crate) fn store_nodes(cx: &mut Cx<'_>, nodes: &[PsNode]) {
    cx.set_list("theta", nodes.iter().map(|n| n.theta.k() as i64).collect());
    cx.set_list("hidden", nodes.iter().map(|n| n.hidden as i64).collect());
    cx.set_list("bits", nodes.iter().map(|n| n.bit as i64).collect());
}

pub(crate) fn load_node(cx: &Cx<'_>, i: usize) -> PsNode {
    PsNode {
        theta: Angle::new(cx.get_list("theta")[i]),
        hidden: (cx.get_list("hidden")[i] & 1) as u8,
        bit: (cx.get_list("bits")[i] & 1) as u8,
    }
}

/// Prepare-and-send stabilizer client. Sends every node, then one masked
/// angle per node in vertex order, and finally announces acceptance.
pub struct StabPsClient {
    test: StabTest,
    offsets: Offsets,
}

impl StabPsClient {
    pub fn new(test: StabTest, offsets: Offsets) -> StabPsClient {
        StabPsClient { test, offsets }
    }
}

impl Machine for StabPsClient {
    fn name(&self) -> &str {
        "stab.client"
    }

    fn listens(&self) -> Vec<String> {
        vec![STAB_RESULT.into()]
    }

    fn emits(&self) -> Vec<String> {
        vec![STAB_QUBITS.into(), STAB_DELTA.into(), STAB_ACCEPT.into()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        let n = self.test.graph.num_vertices() as i64;
        let pc = cx.pc();
        if pc == 0 {
            let mut nodes = Vec::new();
            for (i, &p) in self.test.prep.iter().enumerate() {
                let q = cx.label(&format!("n{i}"));
                nodes.push(ps_prepare(cx, &q, p, self.offsets)?);
                cx.send(STAB_QUBITS, Message::quantum("node", vec![q]).with_values(vec![i as i64]))?;
            }
            store_nodes(cx, &nodes);
            cx.set_pc(1);
            return Ok(true);
        }
        if pc <= 2 * n {
            let i = ((pc - 1) / 2) as usize;
            let prep = self.test.prep[i];
            let node = load_node(cx, i);
            if pc % 2 == 1 {
                let (delta, flip) = ps_delta(cx, prep, node);
                cx.set("flip", flip as i64);
                cx.send(STAB_DELTA, Message::classical("delta", vec![i as i64, delta.k() as i64]))?;
            } else {
                if !cx.has(STAB_RESULT) {
                    return Ok(false);
                }
                let s = (cx.recv(STAB_RESULT)?.value(0)? & 1) as u8;
                let mut bits = cx.get_list("bits");
                bits[i] = ps_decode(prep, node, s, (cx.get_or("flip", 0) & 1) as u8) as i64;
                cx.set_list("bits", bits);
            }
            cx.set_pc(pc + 1);
            return Ok(true);
        }
        if pc == 2 * n + 1 {
            cx.send(STAB_ACCEPT, accept_message(&self.test, &cx.get_list("bits")))?;
            cx.set_pc(pc + 1);
            return Ok(true);
        }
        Ok(false)
    }
}

/// Honest prepare-and-send server for `rounds` consecutive rounds: collects
/// the nodes, applies `attack` (indexed by graph vertex) to them, entangles
/// along the graph and measures each announced angle.
pub struct StabServer {
    graph: Graph,
    attack: PauliString,
    rounds: usize,
    flip: Option<(usize, usize)>,
}

impl StabServer {
    pub fn new(graph: Graph) -> StabServer {
        StabServer { graph, attack: PauliString::identity(), rounds: 1, flip: None }
    }

    pub fn with_attack(mut self, attack: PauliString) -> StabServer {
        self.attack = attack;
        self
    }

    pub fn with_rounds(mut self, rounds: usize) -> StabServer {
        self.rounds = rounds;
        self
    }

    /// Report the flipped outcome for node `node` in round `round`.
    pub fn with_flip(mut self, round: usize, node: usize) -> StabServer {
        self.flip = Some((round, node));
        self
    }

    fn slot(i: usize) -> String {
        format!("n{i}")
    }
}

impl Machine for StabServer {
    fn name(&self) -> &str {
        "stab.server"
    }

    fn listens(&self) -> Vec<String> {
        vec![STAB_QUBITS.into(), STAB_DELTA.into()]
    }

    fn emits(&self) -> Vec<String> {
        vec![STAB_RESULT.into()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        let n = self.graph.num_vertices() as i64;
        let round = cx.get_or("round", 0);
        if round as usize >= self.rounds {
            return Ok(false);
        }
        let got = cx.get_or("got", 0);
        if got < n {
            if !cx.has(STAB_QUBITS) {
                return Ok(false);
            }
            let m = cx.recv(STAB_QUBITS)?;
            let i = m.value(0)?;
            let q = m
                .qubits
                .first()
                .cloned()
                .ok_or_else(|| DqcError::MalformedMessage("node message without a qubit".into()))?;
            if !(0..n).contains(&i) || !cx.reg(&Self::slot(i as usize)).is_empty() {
                return Err(DqcError::OrderViolation(format!("unexpected node index {i}")));
            }
            cx.set_reg(&Self::slot(i as usize), vec![q]);
            cx.set("got", got + 1);
            if got + 1 == n {
                let label = |v: &QubitLabel| -> Result<QubitLabel> {
                    Ok(cx.reg(&Self::slot(self.graph.index_of(v)?))[0].clone())
                };
                let mut attack = PauliString::identity();
                for (v, &p) in self.attack.letters() {
                    attack.set(label(v)?, p);
                }
                let edges: Vec<[QubitLabel; 2]> =
                    self.graph.edges().iter().map(|(a, b)| Ok([label(a)?, label(b)?])).collect::<Result<_>>()?;
                cx.pauli(&attack)?;
                for e in edges {
                    cx.gate(Gate::CZ, &e)?;
                }
            }
            return Ok(true);
        }
        if !cx.has(STAB_DELTA) {
            return Ok(false);
        }
        let m = cx.recv(STAB_DELTA)?;
        let (i, delta) = (m.value(0)?, m.value(1)?);
        let reg = if (0..n).contains(&i) { cx.reg(&Self::slot(i as usize)) } else { vec![] };
        let q = reg.first().cloned().ok_or_else(|| DqcError::OrderViolation(format!("no node {i} to measure")))?;
        let mut s = cx.measure_xy(&q, Angle::new(delta))?;
        if self.flip == Some((round as usize, i as usize)) {
            s ^= 1;
        }
        cx.set_reg(&Self::slot(i as usize), vec![]);
        cx.send(STAB_RESULT, Message::classical("s", vec![s as i64]))?;
        let done = cx.get_or("done", 0) + 1;
        if done == n {
            cx.set("done", 0);
            cx.set("got", 0);
            cx.set("round", round + 1);
        } else {
            cx.set("done", done);
        }
        Ok(true)
    }
}

/// Receive-and-measure stabilizer client: measures each node in its letter
/// and accepts iff every check holds. With `flips` it also receives one bit
/// per node that is xored onto the `X`/`Y` outcomes.
pub struct RmStabClient {
    test: StabTest,
    flips: bool,
}

impl RmStabClient {
    pub fn new(test: StabTest) -> RmStabClient {
        RmStabClient { test, flips: false }
    }

    pub fn with_flips(test: StabTest) -> RmStabClient {
        RmStabClient { test, flips: true }
    }
}

impl Machine for RmStabClient {
    fn name(&self) -> &str {
        "stab.rmclient"
    }

    fn listens(&self) -> Vec<String> {
        let mut v = vec![STAB_RM_QUBITS.to_string()];
        if self.flips {
            v.push(STAB_RM_FLIPS.into());
        }
        v
    }

    fn emits(&self) -> Vec<String> {
        vec![STAB_ACCEPT.into()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        if cx.pc() != 0 || !self.listens().iter().all(|p| cx.has(p)) {
            return Ok(false);
        }
        let n = self.test.graph.num_vertices();
        let qs = cx.recv(STAB_RM_QUBITS)?.qubits;
        if qs.len() != n {
            return Err(DqcError::MalformedMessage(format!("expected {n} nodes, got {}", qs.len())));
        }
        let flips = if self.flips { cx.recv(STAB_RM_FLIPS)?.classical } else { vec![0; n] };
        let mut bits = vec![0i64; n];
        for (i, v) in self.test.graph.vertices().iter().enumerate() {
            let r = match self.test.prep_of(v).letter() {
                Pauli::X => cx.measure_xy(&qs[i], Angle::ZERO)? as i64 ^ flips[i],
                Pauli::Y => cx.measure_xy(&qs[i], Angle::new(4))? as i64 ^ flips[i],
                Pauli::Z => cx.measure_z(&qs[i])? as i64,
                Pauli::I => {
                    cx.discard(&qs[i])?;
                    0
                }
            };
            bits[i] = r;
        }
        cx.send(STAB_ACCEPT, accept_message(&self.test, &bits))?;
        cx.set_pc(1);
        Ok(true)
    }
}

/// Receive-and-measure server: prepares the graph state, applies `attack`
/// and sends all nodes in vertex order.
pub struct StabRmServer {
    graph: Graph,
    attack: PauliString,
}

impl StabRmServer {
    pub fn new(graph: Graph, attack: PauliString) -> StabRmServer {
        StabRmServer { graph, attack }
    }
}

impl Machine for StabRmServer {
    fn name(&self) -> &str {
        "stab.rmserver"
    }

    fn listens(&self) -> Vec<String> {
        vec![]
    }

    fn emits(&self) -> Vec<String> {
        vec![STAB_RM_QUBITS.into()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        if cx.pc() != 0 {
            return Ok(false);
        }
        let mut s = graph_state(&self.graph)?.apply_pauli(&self.attack)?;
        let mut qs = Vec::new();
        for v in self.graph.vertices() {
            let q = cx.label(v.as_str());
            s.relabel(v, q.clone())?;
            qs.push(q);
        }
        cx.prepare(&s)?;
        cx.send(STAB_RM_QUBITS, Message::quantum("graph", qs))?;
        cx.set_pc(1);
        Ok(true)
    }
}

/// Simulator at the server interface turning a receive-and-measure client
/// into a prepare-and-send one: one EPR pair per node, the rotated half goes
/// to the server, the masked angle is `θ + bπ` and the returned bit is
/// unmasked before both halves' data go to the client.
pub struct SigmaS {
    n: usize,
}

impl SigmaS {
    pub fn new(n: usize) -> SigmaS {
        SigmaS { n }
    }
}

impl Machine for SigmaS {
    fn name(&self) -> &str {
        "stab.sigma"
    }

    fn listens(&self) -> Vec<String> {
        vec![STAB_RESULT.into()]
    }

    fn emits(&self) -> Vec<String> {
        vec![STAB_QUBITS.into(), STAB_DELTA.into(), STAB_RM_QUBITS.into(), STAB_RM_FLIPS.into()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        let n = self.n as i64;
        let pc = cx.pc();
        if pc == 0 {
            let mut kept = Vec::new();
            let mut theta = Vec::new();
            for i in 0..self.n {
                let (a, b) = (cx.label(&format!("c{i}")), cx.label(&format!("s{i}")));
                cx.prepare(&PureState::epr(a.clone(), b.clone())?)?;
                let t = cx.angle_a();
                cx.gate(Gate::Zrot(t), one(&b))?;
                cx.send(STAB_QUBITS, Message::quantum("node", vec![b]).with_values(vec![i as i64]))?;
                kept.push(a);
                theta.push(t.k() as i64);
            }
            cx.set_reg("kept", kept);
            cx.set_list("theta", theta);
            cx.set_list("s", vec![0; self.n]);
            cx.set_pc(1);
            return Ok(true);
        }
        if pc <= 2 * n {
            let i = ((pc - 1) / 2) as usize;
            if pc % 2 == 1 {
                let b = cx.coin();
                cx.set("b", b as i64);
                let delta = Angle::new(cx.get_list("theta")[i]) + Angle::pi_times(b);
                cx.send(STAB_DELTA, Message::classical("delta", vec![i as i64, delta.k() as i64]))?;
            } else {
                if !cx.has(STAB_RESULT) {
                    return Ok(false);
                }
                let s = cx.recv(STAB_RESULT)?.value(0)? & 1;
                let mut l = cx.get_list("s");
                l[i] = s ^ cx.get_or("b", 0);
                cx.set_list("s", l);
            }
            cx.set_pc(pc + 1);
            return Ok(true);
        }
        if pc == 2 * n + 1 {
            cx.send(STAB_RM_QUBITS, Message::quantum("graph", cx.reg("kept")))?;
            cx.send(STAB_RM_FLIPS, Message::classical("s", cx.get_list("s")))?;
            cx.set_pc(pc + 1);
            return Ok(true);
        }
        Ok(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acframework::{distinguishability, OpenInput, System, World};
    use crate::graphstate::{find_two_coloring, stabilizer_generator};

    fn graphs() -> Vec<Graph> {
        vec![Graph::path(2), Graph::path(3), Graph::cycle(4).unwrap(), Graph::grid(2, 3), Graph::star(3)]
    }

    fn singles(g: &Graph) -> Vec<PauliString> {
        let mut v = vec![];
        for l in g.vertices() {
            for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                v.push(PauliString::single(l.clone(), p));
            }
        }
        v
    }

    #[test]
    fn honest_tests_never_reject() {
        for g in graphs() {
            for j in g.vertices() {
                let t = stab_to_ps(&g, &stabilizer_generator(&g, j).unwrap()).unwrap();
                assert!(rm_detection(&t, &PauliString::identity()).unwrap().abs() < 1e-10);
                assert!(ps_detection(&t, &PauliString::identity(), Offsets::HalfCircle).unwrap().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn elements_with_y_letters_pass_honestly() {
        let g = Graph::complete(3);
        let all: BTreeSet<QubitLabel> = g.vertices().iter().take(2).cloned().collect();
        let e = stabilizer_element(&g, &all).unwrap();
        assert_eq!(e.count(Pauli::Y), 2);
        let t = stab_to_ps(&g, &e).unwrap();
        assert!(rm_detection(&t, &PauliString::identity()).unwrap().abs() < 1e-10);
        assert!(ps_detection(&t, &PauliString::identity(), Offsets::Flips).unwrap().abs() < 1e-10);
    }

    #[test]
    fn translation_rejects_bad_elements() {
        let g = Graph::path(3);
        assert!(matches!(stab_to_ps(&g, &PauliString::identity()), Err(DqcError::Precondition(_))));
        let labels = g.vertices().to_vec();
        let not = PauliString::parse("XXI", &labels).unwrap();
        assert!(matches!(stab_to_ps(&g, &not), Err(DqcError::NotStabilizer(_))));
        let neg = stabilizer_generator(&g, &labels[0]).unwrap().with_phase(2);
        assert!(matches!(stab_to_ps(&g, &neg), Err(DqcError::NotStabilizer(_))));
    }

    #[test]
    fn rm_and_ps_detection_agree_for_single_paulis() {
        for g in graphs().into_iter().take(3) {
            for j in g.vertices() {
                let t = stab_to_ps(&g, &stabilizer_generator(&g, j).unwrap()).unwrap();
                for a in singles(&g) {
                    let rm = rm_detection(&t, &a).unwrap();
                    let ps = ps_detection(&t, &a, Offsets::Flips).unwrap();
                    assert!((rm - ps).abs() < 1e-10, "{a} on {j}: rm {rm} ps {ps}");
                    assert!(rm.abs() < 1e-10 || (rm - 1.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn half_circle_offsets_twirl_x_attacks() {
        let g = Graph::path(2);
        let v = g.vertices().to_vec();
        let t = stab_to_ps(&g, &stabilizer_generator(&g, &v[0]).unwrap()).unwrap();
        let x = PauliString::single(v[0].clone(), Pauli::X);
        assert!(rm_detection(&t, &x).unwrap().abs() < 1e-10);
        assert!((ps_detection(&t, &x, Offsets::HalfCircle).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn pattern_tests_catch_anticommuting_z() {
        let g = Graph::grid(2, 2);
        let c = find_two_coloring(&g).unwrap();
        let t = pattern_test(&g, &c, true).unwrap();
        assert!(rm_detection(&t, &PauliString::identity()).unwrap().abs() < 1e-10);
        let b = c.black.iter().next().unwrap().clone();
        assert!((rm_detection(&t, &PauliString::single(b, Pauli::Z)).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn product_state_is_caught_half_the_time() {
        let g = Graph::path(2);
        let c = find_two_coloring(&g).unwrap();
        let t = pattern_test(&g, &c, true).unwrap();
        let no_edges = StabTest { graph: Graph::new(g.vertices().to_vec()).unwrap(), ..t.clone() };
        assert!((rm_detection(&no_edges, &PauliString::identity()).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn engine_runs_match_the_direct_evaluators() {
        let g = Graph::path(3);
        let v = g.vertices().to_vec();
        let t = stab_to_ps(&g, &stabilizer_generator(&g, &v[1]).unwrap()).unwrap();
        for a in [PauliString::identity(), PauliString::single(v[0].clone(), Pauli::X)] {
            let ps = System::compose(vec![
                System::single(StabPsClient::new(t.clone(), Offsets::Flips)),
                System::single(StabServer::new(g.clone()).with_attack(a.clone())),
            ])
            .unwrap();
            let rm = System::compose(vec![
                System::single(StabRmServer::new(g.clone(), a.clone())),
                System::single(RmStabClient::new(t.clone())),
            ])
            .unwrap();
            for (sys, want) in
                [(ps, ps_detection(&t, &a, Offsets::Flips).unwrap()), (rm, rm_detection(&t, &a).unwrap())]
            {
                let rej: f64 = sys
                    .enumerate(World::new())
                    .unwrap()
                    .iter()
                    .filter(|w| w.outputs[STAB_ACCEPT][0].classical[0] == 0)
                    .map(|w| w.prob)
                    .sum();
                assert!((rej - want).abs() < 1e-10, "{a}: engine {rej} direct {want}");
            }
        }
    }

    #[test]
    fn sigma_s_makes_rm_prime_equal_to_ps() {
        for n in [2usize, 3] {
            let g = Graph::path(n);
            let v = g.vertices().to_vec();
            let mut elements: Vec<PauliString> = v.iter().map(|j| stabilizer_generator(&g, j).unwrap()).collect();
            if n == 2 {
                elements.push(stabilizer_element(&g, &v.iter().cloned().collect()).unwrap());
            }
            for e in elements {
                let t = stab_to_ps(&g, &e).unwrap();
                let ps = System::single(StabPsClient::new(t.clone(), Offsets::HalfCircle));
                let rm =
                    System::compose(vec![System::single(SigmaS::new(n)), System::single(RmStabClient::with_flips(t))])
                        .unwrap();
                let outs = vec![STAB_QUBITS.to_string(), STAB_DELTA.to_string(), STAB_ACCEPT.to_string()];
                let probes: Vec<_> = (0..1i64 << n)
                    .map(|m| (0..n).map(|i| OpenInput::classical(STAB_RESULT, "s", vec![m >> i & 1])).collect())
                    .collect();
                let d = distinguishability(&ps, &outs, &rm, &outs, &probes).unwrap();
                assert!(d.exact, "{e}: ε = {}", d.epsilon);
            }
        }
    }
}
