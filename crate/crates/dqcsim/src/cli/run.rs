use std::collections::BTreeMap;

use serde::Serialize;

use super::config::{Mode, ProtocolName, RunConfig};
use crate::acframework::{
    delivered_state, distinguishability, fingerprint, ideal_rsp, rsp_input_port, rsp_theta_port, Cx,
    HonestClientFilter, Machine, Message, OpenInput, System, TranscriptEntry, World, BLIND_CLIENT_IN, BLIND_CLIENT_OUT,
    EXACT_TOL, RSP_SERVER_OUT,
};
use crate::error::{DqcError, Result};
use crate::protocols::{
    blind_rm_system, rsp_ideal, rsp_qubit_port, rsp_real, rsp_report_port, ubqc_ps_system, Protocol3Client, StabServer,
    TrapClient, TrapInstance, TrapServer, P3_OUTPUT, RSP_CORRECTION,
};
use crate::qstate::{PureState, QubitLabel};

/// Outcome of `run`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub protocol: String,
    pub mode: Mode,
    pub seed: Option<u64>,
    pub accepted: bool,
    pub p_abort: f64,
    pub branches: usize,
    pub output_state_fingerprint: Option<String>,
    pub output_distribution: Option<BTreeMap<String, f64>>,
    pub transcript: Vec<TranscriptEntry>,
}

impl RunResult {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serialisable");
        s.push('\n');
        s
    }

    pub fn summary(&self) -> String {
        let verdict = if self.accepted { "accepted" } else { "aborted" };
        match self.mode {
            Mode::Sample => format!("{}: {verdict} (seed {})", self.protocol, self.seed.unwrap_or_default()),
            Mode::Enumerate => {
                format!("{}: {verdict}, p_abort = {:.12} over {} branches", self.protocol, self.p_abort, self.branches)
            }
        }
    }
}

struct Setup {
    sys: System,
    world: World,
    port: &'static str,
}

fn single_input(p: &crate::mbqc::MeasurementPattern) -> Result<QubitLabel> {
    match p.inputs.as_slice() {
        [v] => Ok(v.clone()),
        other => {
            Err(DqcError::Config(format!("quantum-input runs need one input vertex, pattern has {}", other.len())))
        }
    }
}

fn quantum_input(cfg: &RunConfig, world: &mut World) -> Result<()> {
    world.add_state(&cfg.input_state("in".into())?)?;
    world.inject(BLIND_CLIENT_IN, Message::quantum("psi", vec!["in".into()]));
    Ok(())
}

fn honest_only(cfg: &RunConfig, what: &str) -> Result<()> {
    if !cfg.dishonest.is_empty() || !cfg.server_honest || !cfg.attack.is_empty() {
        return Err(DqcError::Config(format!("{what} runs with an honest roster only")));
    }
    Ok(())
}

fn setup(cfg: &RunConfig, world: World) -> Result<Setup> {
    let mut world = world;
    match cfg.protocol()? {
        ProtocolName::Rsp => {
            honest_only(cfg, "rsp")?;
            let (n, k) = (cfg.n.unwrap_or(2), cfg.k.unwrap_or(1));
            world.inject(&rsp_theta_port(k), Message::classical("theta", vec![cfg.theta()?.k() as i64]));
            Ok(Setup { sys: rsp_real(n, k, &[], true)?, world, port: RSP_SERVER_OUT })
        }
        name @ (ProtocolName::Ubqc | ProtocolName::BlindRm) => {
            honest_only(cfg, name.as_str())?;
            let p = cfg.pattern()?;
            single_input(&p)?;
            quantum_input(cfg, &mut world)?;
            let sys = if name == ProtocolName::Ubqc { ubqc_ps_system(&p)? } else { blind_rm_system(&p)? };
            Ok(Setup { sys, world, port: BLIND_CLIENT_OUT })
        }
        ProtocolName::Protocol1 => {
            let p = cfg.pattern()?;
            let psi = cfg.input_state(single_input(&p)?)?;
            let inst = TrapInstance::new(p, psi)?;
            quantum_input(cfg, &mut world)?;
            let sys = System::compose(vec![
                System::single(TrapClient::new(inst.clone())),
                System::single(TrapServer::new(&inst, cfg.attack()?)),
            ])?;
            Ok(Setup { sys, world, port: BLIND_CLIENT_OUT })
        }
        ProtocolName::Protocol3 => {
            let p = cfg.pattern()?;
            let x = cfg.x.clone().unwrap_or_else(|| vec![0; p.inputs.len()]);
            let graph = p.graph.clone();
            let client = Protocol3Client::new(p, x, cfg.k.unwrap_or(1))?;
            let server = StabServer::new(graph).with_rounds(client.rounds()).with_attack(cfg.attack()?);
            let sys = System::compose(vec![System::single(client), System::single(server)])?;
            Ok(Setup { sys, world, port: P3_OUTPUT })
        }
    }
}

fn aborted(w: &World, port: &str) -> bool {
    w.outputs.get(port).and_then(|ms| ms.first()).map_or(true, |m| m.tag == "abort")
}

fn bits_key(m: &Message) -> String {
    m.classical.iter().map(|v| v.to_string()).collect()
}

/// Run one protocol; sampling records a transcript, enumeration reports
/// the exact abort probability and averaged output.
pub fn cmd_run(cfg: &RunConfig, mode_flag: Option<Mode>, seed_flag: Option<u64>) -> Result<RunResult> {
    let seed = seed_flag.or(cfg.seed);
    let mode = cfg.resolve_mode(mode_flag, seed)?;
    let protocol = cfg.protocol()?.as_str().to_string();
    let base = match mode {
        Mode::Sample => World::new().sampling(seed.expect("checked")).recording(),
        Mode::Enumerate => World::new(),
    };
    let s = setup(cfg, base)?;
    let classical_out = s.port == P3_OUTPUT;
    match mode {
        Mode::Sample => {
            let w = s.sys.sample(s.world)?;
            let accepted = !aborted(&w, s.port);
            let msg = w.outputs.get(s.port).and_then(|ms| ms.first());
            let fp = match msg {
                Some(m) if !m.qubits.is_empty() => Some(fingerprint(&w.state.reduced(&m.qubits)?)),
                _ => None,
            };
            let dist = match msg {
                Some(m) if classical_out && accepted => Some(BTreeMap::from([(bits_key(m), 1.0)])),
                _ => None,
            };
            Ok(RunResult {
                protocol,
                mode,
                seed,
                accepted,
                p_abort: if accepted { 0.0 } else { 1.0 },
                branches: 1,
                output_state_fingerprint: fp,
                output_distribution: dist,
                transcript: w.transcript.unwrap_or_default(),
            })
        }
        Mode::Enumerate => {
            let ws = s.sys.enumerate(s.world)?;
            let p_abort: f64 = ws.iter().filter(|w| aborted(w, s.port)).map(|w| w.prob).sum();
            let (_, rho) = delivered_state(&ws, s.port)?;
            let dist = if classical_out {
                let mut d = BTreeMap::new();
                for w in ws.iter().filter(|w| !aborted(w, s.port)) {
                    *d.entry(bits_key(&w.outputs[s.port][0])).or_insert(0.0) += w.prob;
                }
                Some(d)
            } else {
                None
            };
            Ok(RunResult {
                protocol,
                mode,
                seed,
                accepted: p_abort <= EXACT_TOL,
                p_abort,
                branches: ws.len(),
                output_state_fingerprint: rho.as_ref().map(fingerprint),
                output_distribution: dist,
                transcript: Vec::new(),
            })
        }
    }
}

/// What the ideal side of `distinguish` is built with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SimulatorChoice {
    /// The simulator matching the dishonest set.
    Matched,
    /// A simulator with the right interface that ignores what it is sent.
    Naive,
    /// The real system again.
    Real,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistinguishReport {
    pub protocol: String,
    pub n: usize,
    pub k: usize,
    pub dishonest: Vec<usize>,
    pub server_honest: bool,
    pub simulator: SimulatorChoice,
    pub probes: usize,
    pub epsilon: f64,
    pub pass: bool,
}

impl DistinguishReport {
    pub fn summary(&self) -> String {
        format!(
            "{} n={} k={} dishonest={:?} server_honest={} vs {:?}: epsilon = {:.3e} over {} probes: {}",
            self.protocol,
            self.n,
            self.k,
            self.dishonest,
            self.server_honest,
            self.simulator,
            self.epsilon,
            self.probes,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Stand-in for the RSP simulators: same ports, no use of its inputs.
pub struct NaiveRspSimulator {
    n: usize,
    d: Vec<usize>,
    server: bool,
}

impl NaiveRspSimulator {
    pub fn new(n: usize, dishonest: &[usize], server_honest: bool) -> Result<NaiveRspSimulator> {
        if server_honest && dishonest.is_empty() {
            return Err(DqcError::Precondition("nothing to simulate: every party is honest".into()));
        }
        let mut d = dishonest.to_vec();
        d.sort_unstable();
        d.dedup();
        Ok(NaiveRspSimulator { n, d, server: !server_honest })
    }

    fn honest(&self) -> Vec<usize> {
        (1..=self.n).filter(|j| !self.d.contains(j)).collect()
    }
}

impl Machine for NaiveRspSimulator {
    fn name(&self) -> &str {
        "rsp.naive"
    }

    fn listens(&self) -> Vec<String> {
        let mut v: Vec<String> = self.d.iter().map(|&j| rsp_report_port(j)).collect();
        if self.server {
            v.push(RSP_SERVER_OUT.into());
            v.extend(self.honest().into_iter().map(rsp_qubit_port));
        }
        v
    }

    fn emits(&self) -> Vec<String> {
        let mut v: Vec<String> = self.d.iter().map(|&j| rsp_input_port(j)).collect();
        if self.server {
            v.push(RSP_CORRECTION.into());
        } else {
            v.extend(self.d.iter().map(|&j| rsp_qubit_port(j)));
        }
        v
    }

    fn step(&self, cx: &mut Cx<'_>) -> Result<bool> {
        match cx.pc() {
            0 => {
                for &j in &self.d {
                    if self.server {
                        cx.send(&rsp_input_port(j), Message::classical("c", vec![0]))?;
                    } else {
                        let q = cx.label(&format!("q{j}"));
                        cx.prepare(&PureState::plus(q.clone()))?;
                        cx.send(&rsp_qubit_port(j), Message::quantum("psi", vec![q]))?;
                    }
                }
                cx.set_pc(1);
                Ok(true)
            }
            1 if self.listens().iter().all(|p| cx.has(p)) => {
                for p in self.listens() {
                    cx.recv(&p)?;
                }
                if self.server {
                    cx.send(RSP_CORRECTION, Message::classical("correction", vec![0, 0]))?;
                } else {
                    for &j in &self.d {
                        cx.send(&rsp_input_port(j), Message::classical("c", vec![0]))?;
                    }
                }
                cx.set_pc(2);
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

fn naive_ideal(n: usize, k: usize, d: &[usize], server_honest: bool) -> Result<System> {
    let mut parts = vec![System::single(ideal_rsp(n, k)?)];
    for j in (1..=n).filter(|&j| j != k && !d.contains(&j)) {
        parts.push(System::single(HonestClientFilter::new(j)));
    }
    parts.push(System::single(NaiveRspSimulator::new(n, d, server_honest)?));
    System::compose(parts)
}

/// Probes and observed outputs for an RSP roster, over every `θ ∈ A`.
pub fn rsp_probes(n: usize, k: usize, d: &[usize], server_honest: bool) -> (Vec<Vec<OpenInput>>, Vec<String>) {
    let mut choices = vec![(0..8).map(|t| OpenInput::classical(&rsp_theta_port(k), "theta", vec![t])).collect()];
    for &j in d {
        let mut reports = Vec::new();
        for t in 0..16 {
            for r in 0..2 {
                reports.push(OpenInput::classical(&rsp_report_port(j), "report", vec![t, r]));
            }
        }
        choices.push(reports);
    }
    let mut outs: Vec<String> = Vec::new();
    if server_honest {
        outs.extend(d.iter().map(|&j| rsp_qubit_port(j)));
        outs.push(RSP_SERVER_OUT.into());
    } else {
        for j in (1..=n).filter(|j| !d.contains(j)) {
            choices.push(vec![OpenInput::quantum(&rsp_qubit_port(j), "psi", 1)]);
        }
        outs.push(RSP_CORRECTION.into());
    }
    (crate::acframework::probe_grid(&choices), outs)
}

/// Exact distance between the real RSP system and the chosen ideal side.
pub fn cmd_distinguish(cfg: &RunConfig, sim: SimulatorChoice) -> Result<DistinguishReport> {
    let name = cfg.protocol.unwrap_or(ProtocolName::Rsp);
    if name != ProtocolName::Rsp {
        return Err(DqcError::Config(format!("distinguish supports rsp, got {}", name.as_str())));
    }
    let (n, k) = (cfg.n.unwrap_or(3), cfg.k.unwrap_or(1));
    let (d, sh) = (cfg.dishonest.clone(), cfg.server_honest);
    let real = rsp_real(n, k, &d, sh)?;
    let other = match sim {
        SimulatorChoice::Matched => rsp_ideal(n, k, &d, sh)?,
        SimulatorChoice::Naive => naive_ideal(n, k, &d, sh)?,
        SimulatorChoice::Real => rsp_real(n, k, &d, sh)?,
    };
    let (probes, outs) = rsp_probes(n, k, &d, sh);
    let r = distinguishability(&real, &outs, &other, &outs, &probes)?;
    Ok(DistinguishReport {
        protocol: name.as_str().into(),
        n,
        k,
        dishonest: d,
        server_honest: sh,
        simulator: sim,
        probes: r.probes,
        epsilon: r.epsilon,
        pass: r.exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::from_json(text).unwrap()
    }

    #[test]
    fn sampled_rsp_is_reproducible() {
        let c = cfg(r#"{"protocol":"rsp","n":2,"theta":5}"#);
        let a = cmd_run(&c, None, Some(7)).unwrap();
        let b = cmd_run(&c, None, Some(7)).unwrap();
        assert!(a.accepted);
        assert!(!a.transcript.is_empty());
        assert_eq!(a.to_json(), b.to_json());
        let want = fingerprint(&PureState::plus_angle("o", crate::qstate::Angle::new(5)).to_mixed());
        assert_eq!(a.output_state_fingerprint.as_deref(), Some(want.as_str()));
    }

    #[test]
    fn enumerated_ubqc_accepts() {
        let r = cmd_run(&cfg(r#"{"protocol":"ubqc","angles":[3]}"#), None, None).unwrap();
        assert_eq!(r.mode, Mode::Enumerate);
        assert!(r.accepted && r.p_abort == 0.0 && r.branches > 1);
    }

    #[test]
    fn protocol3_reports_classical_outputs() {
        let r = cmd_run(&cfg(r#"{"protocol":"protocol3","angles":[4],"k":0}"#), None, None).unwrap();
        let d = r.output_distribution.unwrap();
        assert!((d.values().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn z_attack_on_a_trap_copy_aborts_sometimes() {
        let c = cfg(r#"{"protocol":"protocol1","angles":[],"attack":{"1:1":"Z"}}"#);
        let r = cmd_run(&c, None, None).unwrap();
        assert!(!r.accepted && r.p_abort > 0.1, "{}", r.summary());
        let aborts = (0..40).filter(|&s| !cmd_run(&c, Some(Mode::Sample), Some(s)).unwrap().accepted).count();
        assert!(aborts > 0);
    }

    #[test]
    fn large_messages_are_not_fingerprinted() {
        let r = cmd_run(&cfg(r#"{"protocol":"protocol1","angles":[3]}"#), None, Some(2)).unwrap();
        assert!(r.accepted);
        let graph = r.transcript.iter().find(|e| e.payload["tag"] == "graph").unwrap();
        assert_eq!(graph.payload["fingerprint"], crate::acframework::unrecorded_fingerprint(15));
    }

    #[test]
    fn honest_only_protocols_refuse_attacks() {
        assert!(cmd_run(&cfg(r#"{"protocol":"ubqc","attack":{"1":"Z"}}"#), None, None).is_err());
    }

    #[test]
    fn distinguish_verdicts() {
        let c = cfg(r#"{"protocol":"rsp","n":2,"server_honest":false}"#);
        assert!(cmd_distinguish(&c, SimulatorChoice::Matched).unwrap().pass);
        let naive = cmd_distinguish(&c, SimulatorChoice::Naive).unwrap();
        assert!(!naive.pass && naive.epsilon > 0.1, "{}", naive.summary());
        assert_eq!(cmd_distinguish(&c, SimulatorChoice::Real).unwrap().epsilon, 0.0);
        let all_honest = cfg(r#"{"protocol":"rsp","n":2}"#);
        assert!(cmd_distinguish(&all_honest, SimulatorChoice::Naive).is_err());
    }
}
