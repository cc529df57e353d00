use nalgebra::DMatrix;
use num_complex::Complex64;

use super::engine::{Cx, Machine, Message};
use crate::error::{DqcError, Result};
use crate::qstate::{Angle, Gate, PureState, QubitLabel};

pub const BLIND_CLIENT_IN: &str = "blind.client.in";
pub const BLIND_CLIENT_OUT: &str = "blind.client.out";
pub const BLIND_SERVER_LEAK: &str = "blind.server.leak";
pub const BLIND_SERVER_IN: &str = "blind.server.in";
pub const BLIND_SERVER_OUT: &str = "blind.server.out";
pub const RSP_SERVER_OUT: &str = "rsp.server.out";

pub fn rsp_theta_port(k: usize) -> String {
    format!("rsp.{k}.theta")
}

pub fn rsp_input_port(j: usize) -> String {
    format!("rsp.{j}.in")
}

fn kraus_check(ops: &[DMatrix<Complex64>]) -> Result<()> {
    let Some(first) = ops.first() else {
        return Err(DqcError::MalformedChannel("empty Kraus list".into()));
    };
    let d = first.ncols();
    let mut sum = DMatrix::<Complex64>::zeros(d, d);
    for k in ops {
        if k.nrows() != d || k.ncols() != d || !d.is_power_of_two() {
            return Err(DqcError::MalformedChannel("Kraus operators must be square and equal-sized".into()));
        }
        sum += k.adjoint() * k;
    }
    let err = (sum - DMatrix::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if err > 1e-10 {
        return Err(DqcError::MalformedChannel(format!("not trace preserving (deviation {err:.3e})")));
    }
    Ok(())
}

/// The ideal blind (or verifiable) delegated computation resource.
///
/// The client port receives `ψ_C`; the resource leaks its size to the
/// server, then waits for the server's bit `c`. With `c = 0` the client
/// receives `U ψ_C`. With `c = 1` the blind variant applies the server's
/// Kraus map to `ψ_C ⊗ ψ_S`; the verifiable variant outputs the abort
/// marker instead.
pub struct IdealDelegation {
    name: String,
    u: DMatrix<Complex64>,
    attack: Vec<DMatrix<Complex64>>,
    verifiable: bool,
}

/// Blind delegation resource; `attack` is the dishonest map as Kraus operators on `ψ_C ⊗ ψ_S`.
pub fn ideal_s_blind(u: DMatrix<Complex64>, attack: Vec<DMatrix<Complex64>>) -> Result<IdealDelegation> {
    kraus_check(std::slice::from_ref(&u))?;
    if !attack.is_empty() {
        kraus_check(&attack)?;
    }
    Ok(IdealDelegation { name: "sblind".into(), u, attack, verifiable: false })
}

/// Verifiable delegation resource.
pub fn ideal_s_ver(u: DMatrix<Complex64>) -> Result<IdealDelegation> {
    kraus_check(std::slice::from_ref(&u))?;
    Ok(IdealDelegation { name: "sver".into(), u, attack: vec![], verifiable: true })
}

impl Machine for IdealDelegation {
    fn name(&self) -> &str {
        &self.name
    }

    fn listens(&self) -> Vec<String> {
        vec![BLIND_CLIENT_IN.into(), BLIND_SERVER_IN.into()]
    }

    fn emits(&self) -> Vec<String> {
        let mut v = vec![BLIND_CLIENT_OUT.into(), BLIND_SERVER_LEAK.into()];
        if !self.verifiable {
            v.push(BLIND_SERVER_OUT.into());
        }
        v
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        match cx.pc() {
            0 if cx.has(BLIND_CLIENT_IN) => {
                let m = cx.recv(BLIND_CLIENT_IN)?;
                if 1usize << m.qubits.len() != self.u.nrows() {
                    return Err(DqcError::Dimension(format!(
                        "U is {}×{} but ψ_C has {} qubits",
                        self.u.nrows(),
                        self.u.ncols(),
                        m.qubits.len()
                    )));
                }
                cx.send(BLIND_SERVER_LEAK, Message::classical("leak", vec![m.qubits.len() as i64]))?;
                cx.set_reg("psi_c", m.qubits);
                cx.set_pc(1);
                Ok(true)
            }
            1 if cx.has(BLIND_SERVER_IN) => {
                let m = cx.recv(BLIND_SERVER_IN)?;
                let c = m.value(0)?;
                cx.set("c", c);
                let psi_c = cx.reg("psi_c");
                match (c, self.verifiable) {
                    (0, _) => {
                        cx.apply_kraus(std::slice::from_ref(&self.u), &psi_c)?;
                        let mut qs = psi_c;
                        let mut vals = vec![];
                        if self.verifiable {
                            let flag = cx.label("flag");
                            cx.prepare(&PureState::z_basis(flag.clone(), 0))?;
                            qs.push(flag);
                            vals.push(0);
                        }
                        cx.send(BLIND_CLIENT_OUT, Message { tag: "out".into(), classical: vals, qubits: qs })?;
                    }
                    (1, false) => {
                        if self.attack.is_empty() {
                            return Err(DqcError::MalformedChannel("c = 1 without an attack map".into()));
                        }
                        let mut targets = psi_c.clone();
                        targets.extend(m.qubits.iter().cloned());
                        if 1usize << targets.len() != self.attack[0].nrows() {
                            return Err(DqcError::Dimension("attack map does not fit ψ_C ⊗ ψ_S".into()));
                        }
                        cx.apply_kraus(&self.attack, &targets)?;
                        cx.send(BLIND_CLIENT_OUT, Message::quantum("out", psi_c))?;
                        cx.send(BLIND_SERVER_OUT, Message::quantum("out", m.qubits))?;
                    }
                    (1, true) => {
                        let mut qs = Vec::new();
                        for i in 0..psi_c.len() {
                            let q = cx.label(&format!("bot{i}"));
                            cx.prepare(&PureState::z_basis(q.clone(), 0))?;
                            qs.push(q);
                        }
                        let flag = cx.label("flag");
                        cx.prepare(&PureState::z_basis(flag.clone(), 1))?;
                        qs.push(flag);
                        cx.send(BLIND_CLIENT_OUT, Message { tag: "abort".into(), classical: vec![1], qubits: qs })?;
                    }
                    _ => return Err(DqcError::MalformedMessage(format!("c must be 0 or 1, got {c}"))),
                }
                cx.set_pc(2);
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

/// Honest-server filter: answers the leak with `c = 0`.
pub struct HonestServerFilter;

impl Machine for HonestServerFilter {
    fn name(&self) -> &str {
        "filter.server"
    }

    fn listens(&self) -> Vec<String> {
        vec![BLIND_SERVER_LEAK.into()]
    }

    fn emits(&self) -> Vec<String> {
        vec![BLIND_SERVER_IN.into()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        if !cx.has(BLIND_SERVER_LEAK) {
            return Ok(false);
        }
        cx.recv(BLIND_SERVER_LEAK)?;
        cx.send(BLIND_SERVER_IN, Message::classical("c", vec![0]))?;
        Ok(true)
    }
}

/// Ideal collective remote state preparation for clients `1..=n`, client `k` choosing `θ`.
pub struct IdealRsp {
    pub n: usize,
    pub k: usize,
}

pub fn ideal_rsp(n: usize, k: usize) -> Result<IdealRsp> {
    if n < 2 || k == 0 || k > n {
        return Err(DqcError::Precondition(format!("need n ≥ 2 and 1 ≤ k ≤ n, got n={n}, k={k}")));
    }
    Ok(IdealRsp { n, k })
}

impl IdealRsp {
    fn others(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.n).filter(move |&j| j != self.k)
    }
}

impl Machine for IdealRsp {
    fn name(&self) -> &str {
        "rsp"
    }

    fn listens(&self) -> Vec<String> {
        let mut v = vec![rsp_theta_port(self.k)];
        v.extend(self.others().map(rsp_input_port));
        v
    }

    fn emits(&self) -> Vec<String> {
        vec![RSP_SERVER_OUT.into()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        if cx.pc() != 0 || !self.listens().iter().all(|p| cx.has(p)) {
            return Ok(false);
        }
        let theta = cx.recv(&rsp_theta_port(self.k))?.value(0)?;
        if !(0..8).contains(&theta) {
            return Err(DqcError::Precondition(format!("θ = {theta}·π/8 is outside A")));
        }
        let theta = Angle::new(theta);
        let mut last = None;
        for j in self.others().collect::<Vec<_>>() {
            let m = cx.recv(&rsp_input_port(j))?;
            if m.value(0)? == 1 {
                let q =
                    m.qubits.first().cloned().ok_or_else(|| {
                        DqcError::MalformedMessage(format!("client {j} set c = 1 without a register"))
                    })?;
                last = Some(q);
            }
        }
        let out = match last {
            None => {
                let q = cx.label("out");
                cx.prepare(&PureState::plus_angle(q.clone(), theta))?;
                q
            }
            Some(q) => {
                cx.gate(Gate::Zrot(theta), std::slice::from_ref(&q))?;
                q
            }
        };
        cx.send(RSP_SERVER_OUT, Message::quantum("rho_s", vec![out]))?;
        cx.set_pc(1);
        Ok(true)
    }
}

/// Honest-client filter for RSP: inputs `c_j = 0` and `|0⟩`.
pub struct HonestClientFilter {
    pub j: usize,
    name: String,
}

impl HonestClientFilter {
    pub fn new(j: usize) -> HonestClientFilter {
        HonestClientFilter { j, name: format!("filter.client{j}") }
    }
}

impl Machine for HonestClientFilter {
    fn name(&self) -> &str {
        &self.name
    }

    fn listens(&self) -> Vec<String> {
        vec![]
    }

    fn emits(&self) -> Vec<String> {
        vec![rsp_input_port(self.j)]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        if cx.pc() != 0 {
            return Ok(false);
        }
        let q = cx.label("zero");
        cx.prepare(&PureState::z_basis(q.clone(), 0))?;
        cx.send(&rsp_input_port(self.j), Message::classical("c", vec![0]).with_qubits(vec![q]))?;
        cx.set_pc(1);
        Ok(true)
    }
}

/// Identity converter forwarding every message from one port to another.
pub struct Relay {
    name: String,
    from: String,
    to: String,
}

impl Relay {
    pub fn new(from: &str, to: &str) -> Relay {
        Relay { name: format!("relay.{from}->{to}"), from: from.into(), to: to.into() }
    }
}

impl Machine for Relay {
    fn name(&self) -> &str {
        &self.name
    }

    fn listens(&self) -> Vec<String> {
        vec![self.from.clone()]
    }

    fn emits(&self) -> Vec<String> {
        vec![self.to.clone()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        if !cx.has(&self.from) {
            return Ok(false);
        }
        let m = cx.recv(&self.from)?;
        cx.send(&self.to, m)?;
        Ok(true)
    }
}

/// Labels carried by the first message on `port` in a terminal world.
pub fn output_qubits(w: &super::engine::World, port: &str) -> Vec<QubitLabel> {
    w.outputs.get(port).and_then(|v| v.first()).map(|m| m.qubits.clone()).unwrap_or_default()
}

/// Swallows every message arriving on a port; its qubits stay in the world
/// but are never read again, which is the same as tracing them out.
pub struct Sink {
    name: String,
    port: String,
}

impl Sink {
    pub fn new(port: &str) -> Sink {
        Sink { name: format!("sink.{port}"), port: port.into() }
    }
}

impl Machine for Sink {
    fn name(&self) -> &str {
        &self.name
    }

    fn listens(&self) -> Vec<String> {
        vec![self.port.clone()]
    }

    fn emits(&self) -> Vec<String> {
        vec![]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        if !cx.has(&self.port) {
            return Ok(false);
        }
        cx.recv(&self.port)?;
        Ok(true)
    }
}
