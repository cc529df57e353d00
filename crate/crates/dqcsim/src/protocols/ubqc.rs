use crate::acframework::{Cx, Machine, Message, BLIND_CLIENT_IN, BLIND_CLIENT_OUT};
use crate::error::{DqcError, Result};
use crate::mbqc::{MeasurementPattern, OutcomeRecord};
use crate::qstate::{Angle, Gate, PureState, QubitLabel};

pub const UBQC_QUBITS: &str = "ubqc.q";
pub const UBQC_DELTA: &str = "ubqc.delta";
pub const UBQC_RESULT: &str = "ubqc.s";
pub const UBQC_RETURN: &str = "ubqc.ret";
pub const RM_INPUT: &str = "rm.input";
pub const RM_NODE: &str = "rm.node";

fn bit(v: i64) -> u8 {
    (v & 1) as u8
}

/// Pad and outcome bookkeeping shared by the two blind clients, stored in
/// the client's memory as per-vertex lists in graph order.
struct Book<'a> {
    p: &'a MeasurementPattern,
}

impl<'a> Book<'a> {
    fn index(&self, v: &QubitLabel) -> usize {
        self.p.graph.index_of(v).expect("pattern vertex")
    }

    fn init(&self, cx: &mut Cx<'_>) {
        let n = self.p.graph.num_vertices();
        for key in ["theta", "x", "z"] {
            cx.set_list(key, vec![0; n]);
        }
        cx.set_list("s", vec![-1; n]);
    }

    fn put(&self, cx: &mut Cx<'_>, key: &str, v: &QubitLabel, value: i64) {
        let mut l = cx.get_list(key);
        l[self.index(v)] = value;
        cx.set_list(key, l);
    }

    fn read(&self, cx: &Cx<'_>, key: &str, v: &QubitLabel) -> i64 {
        cx.get_list(key)[self.index(v)]
    }

    /// Parity of the X pads of input neighbours; those pads reach `v` as `Z`.
    fn neighbour_flip(&self, cx: &Cx<'_>, v: &QubitLabel) -> u8 {
        let x = cx.get_list("x");
        self.p
            .graph
            .neighbors(v)
            .expect("pattern vertex")
            .iter()
            .filter(|w| self.p.inputs.contains(w))
            .fold(0, |acc, w| acc ^ bit(x[self.index(w)]))
    }

    fn outcomes(&self, cx: &Cx<'_>) -> OutcomeRecord {
        let s = cx.get_list("s");
        self.p.graph.vertices().iter().zip(s).filter(|(_, b)| *b >= 0).map(|(v, b)| (v.clone(), b as u8)).collect()
    }

    /// Remove pads and byproducts from the output qubit `q` of vertex `o`.
    fn unpad_output(&self, cx: &mut Cx<'_>, o: &QubitLabel, q: &QubitLabel) -> Result<()> {
        let one = std::slice::from_ref(q);
        if self.p.inputs.contains(o) {
            if self.read(cx, "x", o) == 1 {
                cx.gate(Gate::X, one)?;
            }
            if self.read(cx, "z", o) == 1 {
                cx.gate(Gate::Z, one)?;
            }
        }
        let theta = Angle::new(self.read(cx, "theta", o));
        cx.gate(Gate::Zrot(-theta), one)?;
        if self.neighbour_flip(cx, o) == 1 {
            cx.gate(Gate::Z, one)?;
        }
        let (sx, sz) = self.p.corrections(o, &self.outcomes(cx));
        if sx == 1 {
            cx.gate(Gate::X, one)?;
        }
        if sz == 1 {
            cx.gate(Gate::Z, one)?;
        }
        Ok(())
    }
}

fn check_input(p: &MeasurementPattern, m: &Message) -> Result<()> {
    if m.qubits.len() != p.inputs.len() {
        return Err(DqcError::Dimension(format!(
            "pattern has {} inputs, got {} qubits",
            p.inputs.len(),
            m.qubits.len()
        )));
    }
    Ok(())
}

/// Prepare-and-send blind client: sends `X^x Zrot(θ)`-padded inputs and
/// `|+^θ⟩` for every other vertex, then one masked angle per measurement.
/// Offsets `θ` range over all sixteen multiples of `π/8`.
pub struct UbqcPsClient {
    pattern: MeasurementPattern,
}

impl UbqcPsClient {
    pub fn new(pattern: MeasurementPattern) -> Result<UbqcPsClient> {
        pattern.validate()?;
        Ok(UbqcPsClient { pattern })
    }
}

impl Machine for UbqcPsClient {
    fn name(&self) -> &str {
        "ubqc.client"
    }

    fn listens(&self) -> Vec<String> {
        vec![BLIND_CLIENT_IN.into(), UBQC_RESULT.into(), UBQC_RETURN.into()]
    }

    fn emits(&self) -> Vec<String> {
        vec![UBQC_QUBITS.into(), UBQC_DELTA.into(), BLIND_CLIENT_OUT.into()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        let p = &self.pattern;
        let book = Book { p };
        let pc = cx.pc();
        let m = p.order.len() as i64;
        if pc == 0 {
            if !cx.has(BLIND_CLIENT_IN) {
                return Ok(false);
            }
            let input = cx.recv(BLIND_CLIENT_IN)?;
            check_input(p, &input)?;
            book.init(cx);
            for (i, v) in p.graph.vertices().iter().enumerate() {
                let theta = cx.angle_any();
                book.put(cx, "theta", v, theta.k() as i64);
                let q = match p.inputs.iter().position(|w| w == v) {
                    Some(k) => {
                        let q = input.qubits[k].clone();
                        cx.gate(Gate::Zrot(theta), std::slice::from_ref(&q))?;
                        let x = cx.coin();
                        if x == 1 {
                            cx.gate(Gate::X, std::slice::from_ref(&q))?;
                        }
                        book.put(cx, "x", v, x as i64);
                        q
                    }
                    None => {
                        let q = cx.label(&format!("n{i}"));
                        cx.prepare(&PureState::plus_angle(q.clone(), theta))?;
                        q
                    }
                };
                cx.send(UBQC_QUBITS, Message::quantum("node", vec![q]).with_values(vec![i as i64]))?;
            }
            cx.set_pc(1);
            return Ok(true);
        }
        if pc <= 2 * m {
            let k = ((pc - 1) / 2) as usize;
            let v = &p.order[k];
            if pc % 2 == 1 {
                let alpha = p.adapted_angle(v, &book.outcomes(cx));
                let theta = Angle::new(book.read(cx, "theta", v));
                let r = cx.coin();
                let x = bit(book.read(cx, "x", v));
                let delta = (alpha + theta).signed(x) + Angle::pi_times(r);
                cx.set("r", r as i64);
                let idx = book.index(v) as i64;
                cx.send(UBQC_DELTA, Message::classical("delta", vec![idx, delta.k() as i64]))?;
            } else {
                if !cx.has(UBQC_RESULT) {
                    return Ok(false);
                }
                let s = bit(cx.recv(UBQC_RESULT)?.value(0)?);
                let decoded = s ^ bit(cx.get_or("r", 0)) ^ book.neighbour_flip(cx, v);
                book.put(cx, "s", v, decoded as i64);
            }
            cx.set_pc(pc + 1);
            return Ok(true);
        }
        if pc == 2 * m + 1 {
            if !cx.has(UBQC_RETURN) {
                return Ok(false);
            }
            let ret = cx.recv(UBQC_RETURN)?;
            if ret.qubits.len() != p.outputs.len() {
                return Err(DqcError::MalformedMessage("wrong number of returned qubits".into()));
            }
            for (o, q) in p.outputs.iter().zip(&ret.qubits) {
                book.unpad_output(cx, o, q)?;
            }
            cx.send(BLIND_CLIENT_OUT, Message::quantum("out", ret.qubits))?;
            cx.set_pc(pc + 1);
            return Ok(true);
        }
        Ok(false)
    }
}

/// Honest prepare-and-send server: entangles along the public graph,
/// measures each announced angle and returns the output qubits.
pub struct UbqcPsServer {
    pattern: MeasurementPattern,
}

impl UbqcPsServer {
    pub fn new(pattern: MeasurementPattern) -> UbqcPsServer {
        UbqcPsServer { pattern }
    }
}

fn node_reg(i: usize) -> String {
    format!("node.{i}")
}

fn entangle(cx: &mut Cx<'_>, p: &MeasurementPattern) -> Result<()> {
    for (a, b) in p.graph.edge_indices() {
        let qa = cx.reg(&node_reg(a))[0].clone();
        let qb = cx.reg(&node_reg(b))[0].clone();
        cx.gate(Gate::CZ, &[qa, qb])?;
    }
    Ok(())
}

fn output_labels(cx: &Cx<'_>, p: &MeasurementPattern) -> Vec<QubitLabel> {
    p.outputs.iter().map(|o| cx.reg(&node_reg(p.graph.index_of(o).expect("vertex")))[0].clone()).collect()
}

impl Machine for UbqcPsServer {
    fn name(&self) -> &str {
        "ubqc.server"
    }

    fn listens(&self) -> Vec<String> {
        vec![UBQC_QUBITS.into(), UBQC_DELTA.into()]
    }

    fn emits(&self) -> Vec<String> {
        vec![UBQC_RESULT.into(), UBQC_RETURN.into()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        let p = &self.pattern;
        let n = p.graph.num_vertices() as i64;
        match cx.pc() {
            0 => {
                if !cx.has(UBQC_QUBITS) {
                    return Ok(false);
                }
                while cx.has(UBQC_QUBITS) {
                    let m = cx.recv(UBQC_QUBITS)?;
                    let i = m.value(0)? as usize;
                    cx.set_reg(&node_reg(i), m.qubits);
                    cx.set("received", cx.get_or("received", 0) + 1);
                }
                if cx.get_or("received", 0) == n {
                    entangle(cx, p)?;
                    if p.order.is_empty() {
                        let outs = output_labels(cx, p);
                        cx.send(UBQC_RETURN, Message::quantum("out", outs))?;
                    }
                    cx.set_pc(1);
                }
                Ok(true)
            }
            1 => {
                if !cx.has(UBQC_DELTA) {
                    return Ok(false);
                }
                let m = cx.recv(UBQC_DELTA)?;
                let i = m.value(0)? as usize;
                let q = cx
                    .reg(&node_reg(i))
                    .first()
                    .cloned()
                    .ok_or_else(|| DqcError::OrderViolation(format!("angle for unknown node {i}")))?;
                let s = cx.measure_xy(&q, Angle::new(m.value(1)?))?;
                cx.send(UBQC_RESULT, Message::classical("s", vec![s as i64]))?;
                let done = cx.get_or("measured", 0) + 1;
                cx.set("measured", done);
                if done as usize == p.order.len() {
                    let outs = output_labels(cx, p);
                    cx.send(UBQC_RETURN, Message::quantum("out", outs))?;
                    cx.set_pc(2);
                }
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

/// Receive-and-measure blind client: Pauli-pads its input, sends it once,
/// then measures every returned node locally; no angle ever leaves it.
pub struct BlindRmClient {
    pattern: MeasurementPattern,
}

impl BlindRmClient {
    pub fn new(pattern: MeasurementPattern) -> Result<BlindRmClient> {
        pattern.validate()?;
        Ok(BlindRmClient { pattern })
    }
}

impl Machine for BlindRmClient {
    fn name(&self) -> &str {
        "rm.client"
    }

    fn listens(&self) -> Vec<String> {
        vec![BLIND_CLIENT_IN.into(), RM_NODE.into()]
    }

    fn emits(&self) -> Vec<String> {
        vec![RM_INPUT.into(), BLIND_CLIENT_OUT.into()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        let p = &self.pattern;
        let book = Book { p };
        match cx.pc() {
            0 => {
                if !cx.has(BLIND_CLIENT_IN) {
                    return Ok(false);
                }
                let input = cx.recv(BLIND_CLIENT_IN)?;
                check_input(p, &input)?;
                book.init(cx);
                for (v, q) in p.inputs.iter().zip(&input.qubits) {
                    let z = cx.coin();
                    let x = cx.coin();
                    if z == 1 {
                        cx.gate(Gate::Z, std::slice::from_ref(q))?;
                    }
                    if x == 1 {
                        cx.gate(Gate::X, std::slice::from_ref(q))?;
                    }
                    book.put(cx, "x", v, x as i64);
                    book.put(cx, "z", v, z as i64);
                }
                cx.send(RM_INPUT, Message::quantum("input", input.qubits))?;
                cx.set_pc(1);
                Ok(true)
            }
            1 => {
                if !cx.has(RM_NODE) {
                    return Ok(false);
                }
                while cx.has(RM_NODE) {
                    let m = cx.recv(RM_NODE)?;
                    let i = m.value(0)? as usize;
                    if i >= p.graph.num_vertices() {
                        return Err(DqcError::OrderViolation(format!("unexpected node {i}")));
                    }
                    cx.set_reg(&node_reg(i), m.qubits);
                    cx.set("received", cx.get_or("received", 0) + 1);
                }
                if cx.get_or("received", 0) as usize != p.graph.num_vertices() {
                    return Ok(true);
                }
                for v in &p.order {
                    let q = cx.reg(&node_reg(book.index(v)))[0].clone();
                    let alpha = p.adapted_angle(v, &book.outcomes(cx));
                    let x = bit(book.read(cx, "x", v));
                    let z = bit(book.read(cx, "z", v));
                    let s = cx.measure_xy(&q, alpha.signed(x))?;
                    book.put(cx, "s", v, (s ^ z ^ book.neighbour_flip(cx, v)) as i64);
                }
                let outs = output_labels(cx, p);
                for (o, q) in p.outputs.iter().zip(&outs) {
                    book.unpad_output(cx, o, q)?;
                }
                cx.send(BLIND_CLIENT_OUT, Message::quantum("out", outs))?;
                cx.set_pc(2);
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

/// Honest receive-and-measure server: builds the graph state around the
/// padded input and sends it back node by node in graph order.
pub struct BlindRmServer {
    pattern: MeasurementPattern,
}

impl BlindRmServer {
    pub fn new(pattern: MeasurementPattern) -> BlindRmServer {
        BlindRmServer { pattern }
    }
}

impl Machine for BlindRmServer {
    fn name(&self) -> &str {
        "rm.server"
    }

    fn listens(&self) -> Vec<String> {
        vec![RM_INPUT.into()]
    }

    fn emits(&self) -> Vec<String> {
        vec![RM_NODE.into()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        let p = &self.pattern;
        if cx.pc() != 0 || !cx.has(RM_INPUT) {
            return Ok(false);
        }
        let input = cx.recv(RM_INPUT)?;
        check_input(p, &input)?;
        for (i, v) in p.graph.vertices().iter().enumerate() {
            let q = match p.inputs.iter().position(|w| w == v) {
                Some(k) => input.qubits[k].clone(),
                None => {
                    let q = cx.label(&format!("n{i}"));
                    cx.prepare(&PureState::plus(q.clone()))?;
                    q
                }
            };
            cx.set_reg(&node_reg(i), vec![q]);
        }
        entangle(cx, p)?;
        for i in 0..p.graph.num_vertices() {
            let q = cx.reg(&node_reg(i));
            cx.send(RM_NODE, Message::quantum("node", q).with_values(vec![i as i64]))?;
        }
        cx.set_pc(1);
        Ok(true)
    }
}
