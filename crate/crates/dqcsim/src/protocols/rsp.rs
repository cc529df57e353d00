use serde::{Deserialize, Serialize};

use crate::acframework::{
    ideal_rsp, rsp_input_port, rsp_theta_port, Cx, HonestClientFilter, Machine, Message, System, World, RSP_SERVER_OUT,
};
use crate::error::{DqcError, Result};
use crate::qstate::{Angle, Gate, PureState, QubitLabel};

pub const RSP_CORRECTION: &str = "rsp.corr";

/// Port on which the server hands client `j` its register.
pub fn rsp_qubit_port(j: usize) -> String {
    format!("rsp.{j}.q")
}

/// Port on which client `j` reports `(θ_j, r_j)` to the lead client.
pub fn rsp_report_port(j: usize) -> String {
    format!("rsp.{j}.report")
}

fn check_roster(n: usize, k: usize) -> Result<()> {
    if n < 2 || k == 0 || k > n {
        return Err(DqcError::Precondition(format!("need n ≥ 2 and 1 ≤ k ≤ n, got n={n}, k={k}")));
    }
    Ok(())
}

fn read_report(m: &Message, j: usize) -> Result<(Angle, u8)> {
    let theta = m.value(0)?;
    let r = m.value(1)?;
    if !(0..2).contains(&r) {
        return Err(DqcError::MalformedMessage(format!("client {j} reported r = {r}")));
    }
    Ok((Angle::new(theta), r as u8))
}

fn one(q: &QubitLabel) -> &[QubitLabel] {
    std::slice::from_ref(q)
}

/// Classical record of one run, as seen by the lead client.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RspTranscript {
    pub theta: Angle,
    /// `(θ_j, r_j)` for clients `1..=n` in order.
    pub reports: Vec<(Angle, u8)>,
    pub b: u8,
    pub delta: Angle,
}

impl RspTranscript {
    /// `(−1)^b θ − Σθ_j − π·⊕r_j`.
    pub fn expected_delta(&self) -> Angle {
        let sum = self.reports.iter().fold(Angle::ZERO, |a, (t, _)| a + *t);
        let parity = self.reports.iter().fold(0, |a, (_, r)| a ^ r);
        self.theta.signed(self.b) - sum - Angle::pi_times(parity)
    }

    pub fn is_consistent(&self) -> bool {
        self.delta == self.expected_delta()
    }

    /// Transcript stored by lead client `k` in a terminal world.
    pub fn from_world(w: &World, k: usize) -> Option<RspTranscript> {
        let m = w.memory_of(&format!("rsp.client{k}"))?;
        let get = |key: &str| m.values.get(key).cloned().unwrap_or_default();
        let thetas = get("thetas");
        let rs = get("rs");
        Some(RspTranscript {
            theta: Angle::new(*get("theta").first()?),
            reports: thetas.iter().zip(&rs).map(|(t, r)| (Angle::new(*t), *r as u8)).collect(),
            b: *get("b").first()? as u8,
            delta: Angle::new(*get("delta").first()?),
        })
    }
}

/// Honest server: entangles `|+⟩_S` with one `|0⟩` per client, hands the
/// targets out and applies `X^b Z^δ` once the correction arrives.
pub struct RspServer {
    n: usize,
}

impl RspServer {
    pub fn new(n: usize) -> RspServer {
        RspServer { n }
    }
}

impl Machine for RspServer {
    fn name(&self) -> &str {
        "rsp.server"
    }

    fn listens(&self) -> Vec<String> {
        vec![RSP_CORRECTION.into()]
    }

    fn emits(&self) -> Vec<String> {
        let mut v: Vec<String> = (1..=self.n).map(rsp_qubit_port).collect();
        v.push(RSP_SERVER_OUT.into());
        v
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        match cx.pc() {
            0 => {
                let s = cx.label("s");
                cx.prepare(&PureState::plus(s.clone()))?;
                for j in 1..=self.n {
                    let q = cx.label(&format!("q{j}"));
                    cx.prepare(&PureState::z_basis(q.clone(), 0))?;
                    cx.gate(Gate::CX, &[s.clone(), q.clone()])?;
                    cx.send(&rsp_qubit_port(j), Message::quantum("psi", vec![q]))?;
                }
                cx.set_reg("s", vec![s]);
                cx.set_pc(1);
                Ok(true)
            }
            1 if cx.has(RSP_CORRECTION) => {
                let m = cx.recv(RSP_CORRECTION)?;
                let (b, delta) = (m.value(0)?, m.value(1)?);
                let s = cx.reg("s").remove(0);
                cx.gate(Gate::Zrot(Angle::new(delta)), one(&s))?;
                if b & 1 == 1 {
                    cx.gate(Gate::X, one(&s))?;
                }
                cx.send(RSP_SERVER_OUT, Message::quantum("rho_s", vec![s]))?;
                cx.set_pc(2);
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

/// Honest client `j ≠ k`: measures its register at `−θ_j` and reports.
pub struct RspClient {
    j: usize,
    name: String,
}

impl RspClient {
    pub fn new(j: usize) -> RspClient {
        RspClient { j, name: format!("rsp.client{j}") }
    }
}

impl Machine for RspClient {
    fn name(&self) -> &str {
        &self.name
    }

    fn listens(&self) -> Vec<String> {
        vec![rsp_qubit_port(self.j)]
    }

    fn emits(&self) -> Vec<String> {
        vec![rsp_report_port(self.j)]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        let port = rsp_qubit_port(self.j);
        if cx.pc() != 0 || !cx.has(&port) {
            return Ok(false);
        }
        let q = single_qubit(cx.recv(&port)?)?;
        let theta = cx.angle_a();
        let r = cx.measure_xy(&q, -theta)?;
        cx.send(&rsp_report_port(self.j), Message::classical("report", vec![theta.k() as i64, r as i64]))?;
        cx.set_pc(1);
        Ok(true)
    }
}

fn single_qubit(m: Message) -> Result<QubitLabel> {
    match m.qubits.as_slice() {
        [q] => Ok(q.clone()),
        qs => Err(DqcError::MalformedMessage(format!("expected one qubit, got {}", qs.len()))),
    }
}

/// Honest client `k`: takes `θ`, measures its own register, collects all
/// reports and sends `(b, δ)` to the server.
pub struct RspLeadClient {
    n: usize,
    k: usize,
    name: String,
}

impl RspLeadClient {
    pub fn new(n: usize, k: usize) -> Result<RspLeadClient> {
        check_roster(n, k)?;
        Ok(RspLeadClient { n, k, name: format!("rsp.client{k}") })
    }

    fn others(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.n).filter(move |&j| j != self.k)
    }
}

impl Machine for RspLeadClient {
    fn name(&self) -> &str {
        &self.name
    }

    fn listens(&self) -> Vec<String> {
        let mut v = vec![rsp_theta_port(self.k), rsp_qubit_port(self.k)];
        v.extend(self.others().map(rsp_report_port));
        v
    }

    fn emits(&self) -> Vec<String> {
        vec![RSP_CORRECTION.into()]
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        if cx.pc() != 0 || !self.listens().iter().all(|p| cx.has(p)) {
            return Ok(false);
        }
        let theta = cx.recv(&rsp_theta_port(self.k))?.value(0)?;
        if !(0..8).contains(&theta) {
            return Err(DqcError::Precondition(format!("θ = {theta}·π/8 is outside A")));
        }
        let q = single_qubit(cx.recv(&rsp_qubit_port(self.k))?)?;
        let mut thetas = vec![0; self.n];
        let mut rs = vec![0; self.n];
        let own = cx.angle_a();
        rs[self.k - 1] = cx.measure_xy(&q, -own)? as i64;
        thetas[self.k - 1] = own.k() as i64;
        for j in self.others().collect::<Vec<_>>() {
            let (t, r) = read_report(&cx.recv(&rsp_report_port(j))?, j)?;
            thetas[j - 1] = t.k() as i64;
            rs[j - 1] = r as i64;
        }
        let b = cx.coin();
        let t = RspTranscript {
            theta: Angle::new(theta),
            reports: thetas.iter().zip(&rs).map(|(t, r)| (Angle::new(*t), *r as u8)).collect(),
            b,
            delta: Angle::ZERO,
        };
        let delta = t.expected_delta();
        cx.set_list("theta", vec![theta]);
        cx.set_list("thetas", thetas);
        cx.set_list("rs", rs);
        cx.set_list("b", vec![b as i64]);
        cx.set_list("delta", vec![delta.k() as i64]);
        cx.send(RSP_CORRECTION, Message::classical("correction", vec![b as i64, delta.k() as i64]))?;
        cx.set_pc(1);
        Ok(true)
    }
}

/// Honest parties of the real protocol: the server unless dishonest, client
/// `k`, and every client outside `dishonest`.
pub fn rsp_real(n: usize, k: usize, dishonest: &[usize], server_honest: bool) -> Result<System> {
    check_roster(n, k)?;
    check_dishonest(n, k, dishonest)?;
    let mut parts = vec![System::single(RspLeadClient::new(n, k)?)];
    if server_honest {
        parts.push(System::single(RspServer::new(n)));
    }
    for j in (1..=n).filter(|&j| j != k && !dishonest.contains(&j)) {
        parts.push(System::single(RspClient::new(j)));
    }
    System::compose(parts)
}

/// Ideal RSP with honest-client filters and the simulator matching the
/// dishonest set: none, Simulator 1 (clients only) or Simulator 2 (server).
pub fn rsp_ideal(n: usize, k: usize, dishonest: &[usize], server_honest: bool) -> Result<System> {
    check_roster(n, k)?;
    check_dishonest(n, k, dishonest)?;
    let mut parts = vec![System::single(ideal_rsp(n, k)?)];
    for j in (1..=n).filter(|&j| j != k && !dishonest.contains(&j)) {
        parts.push(System::single(HonestClientFilter::new(j)));
    }
    if !server_honest {
        parts.push(System::single(RspServerSimulator::new(n, k, dishonest)?));
    } else if !dishonest.is_empty() {
        parts.push(System::single(RspClientSimulator::new(n, k, dishonest)?));
    }
    System::compose(parts)
}

fn check_dishonest(n: usize, k: usize, d: &[usize]) -> Result<()> {
    if let Some(j) = d.iter().find(|&&j| j == k || j == 0 || j > n) {
        return Err(DqcError::Precondition(format!("client {j} cannot be dishonest (k = {k}, n = {n})")));
    }
    Ok(())
}

/// Simulator for a dishonest client set `D` with an honest server: runs the
/// server and the classical part of client `k` with `θ = 0`, then feeds the
/// corrected register to the ideal resource at `ℓ = max D`.
pub struct RspClientSimulator {
    d: Vec<usize>,
}

impl RspClientSimulator {
    pub fn new(n: usize, k: usize, dishonest: &[usize]) -> Result<RspClientSimulator> {
        check_roster(n, k)?;
        if dishonest.is_empty() {
            return Err(DqcError::Precondition("Simulator 1 needs at least one dishonest client".into()));
        }
        check_dishonest(n, k, dishonest)?;
        let mut d = dishonest.to_vec();
        d.sort_unstable();
        d.dedup();
        Ok(RspClientSimulator { d })
    }
}

impl Machine for RspClientSimulator {
    fn name(&self) -> &str {
        "rsp.sim1"
    }

    fn listens(&self) -> Vec<String> {
        self.d.iter().map(|&j| rsp_report_port(j)).collect()
    }

    fn emits(&self) -> Vec<String> {
        let mut v: Vec<String> = self.d.iter().map(|&j| rsp_qubit_port(j)).collect();
        v.extend(self.d.iter().map(|&j| rsp_input_port(j)));
        v
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        match cx.pc() {
            0 => {
                let s = cx.label("s");
                cx.prepare(&PureState::plus(s.clone()))?;
                for &j in &self.d {
                    let q = cx.label(&format!("q{j}"));
                    cx.prepare(&PureState::z_basis(q.clone(), 0))?;
                    cx.gate(Gate::CX, &[s.clone(), q.clone()])?;
                    cx.send(&rsp_qubit_port(j), Message::quantum("psi", vec![q]))?;
                }
                cx.set_reg("s", vec![s]);
                cx.set_pc(1);
                Ok(true)
            }
            1 if self.listens().iter().all(|p| cx.has(p)) => {
                let mut sum = Angle::ZERO;
                let mut parity = 0;
                for &j in &self.d {
                    let (t, r) = read_report(&cx.recv(&rsp_report_port(j))?, j)?;
                    sum = sum + t;
                    parity ^= r;
                }
                let b = cx.coin();
                let s = cx.reg("s").remove(0);
                cx.gate(Gate::Zrot(-sum - Angle::pi_times(parity)), one(&s))?;
                if b == 1 {
                    cx.gate(Gate::X, one(&s))?;
                }
                let last = *self.d.last().expect("non-empty");
                for &j in &self.d {
                    let m = if j == last {
                        Message::classical("c", vec![1]).with_qubits(vec![s.clone()])
                    } else {
                        Message::classical("c", vec![0])
                    };
                    cx.send(&rsp_input_port(j), m)?;
                }
                cx.set_pc(2);
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

/// Simulator for a dishonest server together with a client set `D`: runs the
/// honest clients other than `k`, turns the ideal register into the phase
/// kick on client `k`'s register with a CX and a Z measurement, and emits
/// `(b, δ)` with `δ = −Σθ_j + π·⊕r_j`.
pub struct RspServerSimulator {
    n: usize,
    k: usize,
    d: Vec<usize>,
}

impl RspServerSimulator {
    pub fn new(n: usize, k: usize, dishonest: &[usize]) -> Result<RspServerSimulator> {
        check_roster(n, k)?;
        check_dishonest(n, k, dishonest)?;
        let mut d = dishonest.to_vec();
        d.sort_unstable();
        d.dedup();
        Ok(RspServerSimulator { n, k, d })
    }

    fn honest(&self) -> Vec<usize> {
        (1..=self.n).filter(|j| !self.d.contains(j)).collect()
    }
}

impl Machine for RspServerSimulator {
    fn name(&self) -> &str {
        "rsp.sim2"
    }

    fn listens(&self) -> Vec<String> {
        let mut v = vec![RSP_SERVER_OUT.to_string()];
        v.extend(self.honest().into_iter().map(rsp_qubit_port));
        v.extend(self.d.iter().map(|&j| rsp_report_port(j)));
        v
    }

    fn emits(&self) -> Vec<String> {
        let mut v: Vec<String> = self.d.iter().map(|&j| rsp_input_port(j)).collect();
        v.push(RSP_CORRECTION.into());
        v
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        match cx.pc() {
            0 => {
                for &j in &self.d {
                    cx.send(&rsp_input_port(j), Message::classical("c", vec![0]))?;
                }
                cx.set_pc(1);
                Ok(true)
            }
            1 if self.listens().iter().all(|p| cx.has(p)) => {
                let psi_i = single_qubit(cx.recv(RSP_SERVER_OUT)?)?;
                let mut sum = Angle::ZERO;
                let mut parity = 0;
                for j in self.honest().into_iter().filter(|&j| j != self.k) {
                    let q = single_qubit(cx.recv(&rsp_qubit_port(j))?)?;
                    let t = cx.angle_a();
                    parity ^= cx.measure_xy(&q, -t)?;
                    sum = sum + t;
                }
                let qk = single_qubit(cx.recv(&rsp_qubit_port(self.k))?)?;
                cx.gate(Gate::CX, &[qk.clone(), psi_i.clone()])?;
                let b = cx.measure_z(&psi_i)?;
                let tk = cx.angle_a();
                parity ^= cx.measure_xy(&qk, -tk)?;
                sum = sum + tk;
                for &j in &self.d {
                    let (t, r) = read_report(&cx.recv(&rsp_report_port(j))?, j)?;
                    sum = sum + t;
                    parity ^= r;
                }
                let delta = -sum + Angle::pi_times(parity);
                cx.send(RSP_CORRECTION, Message::classical("correction", vec![b as i64, delta.k() as i64]))?;
                cx.set_pc(2);
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acframework::{delivered_fidelity, distinguishability, output_qubits, OpenInput};

    fn honest_worlds(n: usize, theta: i64) -> Vec<World> {
        let sys = rsp_real(n, 1, &[], true).unwrap();
        let mut w = World::new();
        w.inject(&rsp_theta_port(1), Message::classical("theta", vec![theta]));
        sys.enumerate(w).unwrap()
    }

    #[test]
    fn every_branch_outputs_plus_theta() {
        for n in [2, 3] {
            let ws = honest_worlds(n, 5);
            assert_eq!(ws.len(), 8usize.pow(n as u32) * 2usize.pow(n as u32) * 2);
            let want = PureState::plus_angle("out", Angle::new(5));
            for w in &ws {
                let q = output_qubits(w, RSP_SERVER_OUT);
                let rho = w.state.reduced(&q).unwrap();
                assert!(delivered_fidelity(&rho, &want).unwrap() > 1.0 - 1e-10);
            }
        }
    }

    #[test]
    fn transcripts_satisfy_the_correction_formula() {
        for w in honest_worlds(2, 3) {
            let t = RspTranscript::from_world(&w, 1).unwrap();
            assert!(t.is_consistent());
            assert_eq!(t.reports.len(), 2);
        }
    }

    #[test]
    fn theta_outside_a_is_rejected() {
        let sys = rsp_real(2, 1, &[], true).unwrap();
        let mut w = World::new();
        w.inject(&rsp_theta_port(1), Message::classical("theta", vec![8]));
        assert!(matches!(sys.enumerate(w), Err(DqcError::Precondition(_))));
    }

    #[test]
    fn simulator_one_needs_a_dishonest_client() {
        assert!(RspClientSimulator::new(3, 1, &[]).is_err());
        assert!(RspClientSimulator::new(3, 1, &[1]).is_err());
    }

    fn client_probes(theta: i64) -> Vec<Vec<OpenInput>> {
        let mut probes = Vec::new();
        for t3 in 0..16 {
            for r3 in 0..2 {
                probes.push(vec![
                    OpenInput::classical(&rsp_theta_port(1), "theta", vec![theta]),
                    OpenInput::classical(&rsp_report_port(3), "report", vec![t3, r3]),
                ]);
            }
        }
        probes
    }

    #[test]
    fn dishonest_client_is_simulated_exactly() {
        let real = rsp_real(3, 1, &[3], true).unwrap();
        let ideal = rsp_ideal(3, 1, &[3], true).unwrap();
        let outs = vec![rsp_qubit_port(3), RSP_SERVER_OUT.to_string()];
        for theta in [0, 3, 6] {
            let d = distinguishability(&real, &outs, &ideal, &outs, &client_probes(theta)).unwrap();
            assert!(d.exact, "θ = {theta}: ε = {}", d.epsilon);
        }
    }

    #[test]
    fn dishonest_server_is_simulated_exactly() {
        let real = rsp_real(2, 1, &[], false).unwrap();
        let ideal = rsp_ideal(2, 1, &[], false).unwrap();
        let outs = vec![RSP_CORRECTION.to_string()];
        let probes: Vec<_> = (0..8)
            .map(|t| {
                vec![
                    OpenInput::classical(&rsp_theta_port(1), "theta", vec![t]),
                    OpenInput::quantum(&rsp_qubit_port(1), "psi", 1),
                    OpenInput::quantum(&rsp_qubit_port(2), "psi", 1),
                ]
            })
            .collect();
        let d = distinguishability(&real, &outs, &ideal, &outs, &probes).unwrap();
        assert!(d.exact, "ε = {}", d.epsilon);
    }

    #[test]
    fn cx_gadget_kicks_the_phase() {
        // CX from ψ_k onto |+^θ⟩ then a Z outcome b leaves Z^{(−1)^b θ} on ψ_k.
        let theta = Angle::new(3);
        for input in [0u8, 1] {
            let psi = PureState::xy_basis("k", Angle::new(1), input);
            let s = psi.tensor(&PureState::plus_angle("i", theta)).unwrap();
            let s = s.apply_gate(Gate::CX, &["k".into(), "i".into()]).unwrap();
            for br in s.measure_z(&"i".into()).unwrap() {
                let got = br.state.unwrap();
                let want = psi.apply_gate(Gate::Zrot(theta.signed(br.outcome)), &["k".into()]).unwrap();
                assert!((got.fidelity(&want).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }
}
