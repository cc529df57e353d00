//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test --test acceptance [N ...]` runs all criteria or only the
//! listed numbers. The process exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;

use dqcsim::acframework::{
    delivered_fidelity, distinguishability, output_qubits, rsp_theta_port, Message, OpenInput, Sink, System, World,
    BLIND_CLIENT_IN, BLIND_CLIENT_OUT, RSP_SERVER_OUT,
};
use dqcsim::adversary::{enumerate_e, simulate_attack, simulate_attack_full, PauliAttack};
use dqcsim::cli::{cmd_bound, cmd_distinguish, cmd_run, RunConfig, SimulatorChoice};
use dqcsim::graphstate::{all_stabilizer_elements, find_two_coloring, graph_state, stabilizer_generator, Graph};
use dqcsim::mbqc::MeasurementPattern;
use dqcsim::protocols::{
    pattern_test, ps_detection, rm_detection, rsp_real, stab_to_ps, Offsets, RmStabClient, SigmaS, StabPsClient,
    StabRmServer, StabServer, TrapInstance, UbqcPsClient, STAB_ACCEPT, STAB_DELTA, STAB_QUBITS, STAB_RESULT,
    UBQC_DELTA, UBQC_QUBITS, UBQC_RESULT, UBQC_RETURN,
};
use dqcsim::qstate::{Angle, Gate, Pauli, PauliString, PureState, QubitLabel};

const TOL: f64 = 1e-10;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn psi_c(label: &str) -> PureState {
    PureState::single(label, Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap()
}

/// Amplitude `2^{-n/2} (−1)^{#edges inside x}` with the first vertex most significant.
fn graph_state_oracle(g: &Graph) -> Vec<Complex64> {
    let n = g.num_vertices();
    let scale = (0.5f64).powf(n as f64 / 2.0);
    (0..1usize << n)
        .map(|x| {
            let bit = |i: usize| (x >> (n - 1 - i)) & 1;
            let inside = g.edge_indices().iter().filter(|&&(a, b)| bit(a) == 1 && bit(b) == 1).count();
            Complex64::new(if inside % 2 == 0 { scale } else { -scale }, 0.0)
        })
        .collect()
}

fn stab_graphs() -> Vec<(String, Graph)> {
    let mut gs = vec![
        ("path5".to_string(), Graph::path(5)),
        ("cycle5".to_string(), Graph::cycle(5).unwrap()),
        ("star4".to_string(), Graph::star(4)),
        ("grid2x3".to_string(), Graph::grid(2, 3)),
    ];
    for seed in [1, 2, 3] {
        gs.push((format!("random5#{seed}"), Graph::random(5, 0.5, seed)));
    }
    gs
}

fn small_graphs(max: usize) -> Vec<(String, Graph)> {
    let mut gs = Vec::new();
    for n in 2..=max {
        gs.push((format!("path{n}"), Graph::path(n)));
        gs.push((format!("star{}", n - 1), Graph::star(n - 1)));
        gs.push((format!("complete{n}"), Graph::complete(n)));
        if n >= 3 {
            gs.push((format!("cycle{n}"), Graph::cycle(n).unwrap()));
        }
        for seed in [1, 2] {
            gs.push((format!("random{n}#{seed}"), Graph::random(n, 0.5, seed)));
        }
    }
    if max >= 6 {
        gs.push(("grid2x3".into(), Graph::grid(2, 3)));
    }
    gs
}

fn c1_stabilizer_suite() -> Check {
    let mut elements = 0;
    for (name, g) in stab_graphs() {
        let psi = graph_state(&g).map_err(e2s)?;
        let oracle = graph_state_oracle(&g);
        let drift: f64 = psi.amplitudes().iter().zip(&oracle).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        ensure(drift <= TOL, || format!("{name}: graph state differs from the edge-parity oracle by {drift:e}"))?;
        let group = all_stabilizer_elements(&g).map_err(e2s)?;
        ensure(group.len() == 1 << g.num_vertices(), || format!("{name}: {} elements", group.len()))?;
        for (_, s) in group {
            let m = s.matrix(g.vertices()).map_err(e2s)?;
            let v = nalgebra::DVector::from_vec(oracle.clone());
            let dev = (&m * &v - &v).norm();
            ensure(dev <= TOL, || format!("{name}: {} moves the state by {dev:e}", s.to_text()))?;
            ensure(s.count(Pauli::Y) % 2 == 0, || format!("{name}: {} has odd Y count", s.to_text()))?;
            elements += 1;
        }
    }
    Ok(format!("{elements} elements on 7 graphs"))
}

fn c2_honest_stabilizer_tests() -> Check {
    let mut checked = 0;
    for (name, g) in small_graphs(6) {
        for v in g.vertices() {
            let s = stabilizer_generator(&g, v).map_err(e2s)?;
            let t = stab_to_ps(&g, &s).map_err(e2s)?;
            let id = PauliString::identity();
            let rm = rm_detection(&t, &id).map_err(e2s)?;
            let ps = ps_detection(&t, &id, Offsets::Flips).map_err(e2s)?;
            let ps_a = ps_detection(&t, &id, Offsets::HalfCircle).map_err(e2s)?;
            ensure(rm.abs() <= TOL && ps.abs() <= TOL && ps_a.abs() <= TOL, || {
                format!("{name} g_{v}: honest rejection rm {rm:e} ps {ps:e} ps/A {ps_a:e}")
            })?;
            checked += 1;
        }
    }
    // Full machine runs on P3, including the maximally mixed nodes as exact mixtures.
    let g = Graph::path(3);
    for v in g.vertices() {
        let t = stab_to_ps(&g, &stabilizer_generator(&g, v).map_err(e2s)?).map_err(e2s)?;
        let ps = System::compose(vec![
            System::single(StabPsClient::new(t.clone(), Offsets::HalfCircle)),
            System::single(StabServer::new(g.clone())),
        ])
        .map_err(e2s)?;
        let rm = System::compose(vec![
            System::single(StabRmServer::new(g.clone(), PauliString::identity())),
            System::single(RmStabClient::new(t)),
        ])
        .map_err(e2s)?;
        for sys in [ps, rm] {
            let rej: f64 = sys
                .enumerate(World::new())
                .map_err(e2s)?
                .iter()
                .filter(|w| w.outputs[STAB_ACCEPT][0].classical[0] == 0)
                .map(|w| w.prob)
                .sum();
            ensure(rej.abs() <= TOL, || format!("P3 g_{v}: engine rejection {rej:e}"))?;
        }
    }
    Ok(format!("{checked} generators on graphs up to 6 nodes, plus engine runs on P3"))
}

fn c3_rm_ps_equivalence() -> Check {
    let mut pairs = 0;
    let mut worst = 0.0f64;
    for (name, g) in small_graphs(5) {
        for v in g.vertices() {
            let t = stab_to_ps(&g, &stabilizer_generator(&g, v).map_err(e2s)?).map_err(e2s)?;
            for u in g.vertices() {
                for p in Pauli::NONTRIVIAL {
                    let a = PauliString::single(u.clone(), p);
                    let rm = rm_detection(&t, &a).map_err(e2s)?;
                    let ps = ps_detection(&t, &a, Offsets::Flips).map_err(e2s)?;
                    worst = worst.max((rm - ps).abs());
                    ensure((rm - ps).abs() <= TOL, || format!("{name} g_{v} {}: rm {rm} ps {ps}", a.to_text()))?;
                    pairs += 1;
                }
            }
        }
    }
    Ok(format!("{pairs} (generator, attack) pairs, max gap {worst:.1e}"))
}

fn c4_sigma_s() -> Check {
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in [2usize, 3] {
        let g = Graph::path(n);
        let v = g.vertices().to_vec();
        let mut elements: Vec<PauliString> =
            v.iter().map(|j| stabilizer_generator(&g, j)).collect::<Result<_, _>>().map_err(e2s)?;
        for (_, s) in all_stabilizer_elements(&g).map_err(e2s)? {
            if !s.is_identity() && !elements.contains(&s) {
                elements.push(s);
            }
        }
        for e in elements {
            let t = stab_to_ps(&g, &e).map_err(e2s)?;
            let ps = System::single(StabPsClient::new(t.clone(), Offsets::HalfCircle));
            let rm = System::compose(vec![System::single(SigmaS::new(n)), System::single(RmStabClient::with_flips(t))])
                .map_err(e2s)?;
            let outs = vec![STAB_QUBITS.to_string(), STAB_DELTA.to_string(), STAB_ACCEPT.to_string()];
            let probes: Vec<_> = (0..1i64 << n)
                .map(|m| (0..n).map(|i| OpenInput::classical(STAB_RESULT, "s", vec![m >> i & 1])).collect())
                .collect();
            let d = distinguishability(&ps, &outs, &rm, &outs, &probes).map_err(e2s)?;
            worst = worst.max(d.epsilon);
            ensure(d.exact, || format!("P{n} {}: Choi distance {:e}", e.to_text(), d.epsilon))?;
            count += 1;
        }
    }
    Ok(format!("{count} group elements on P2 and P3, max Choi distance {worst:.1e}"))
}

fn c5_rsp_correctness() -> Check {
    let mut branches = 0;
    for n in [2usize, 3] {
        let sys = rsp_real(n, 1, &[], true).map_err(e2s)?;
        for t in 0..8 {
            let mut w = World::new();
            w.inject(&rsp_theta_port(1), Message::classical("theta", vec![t]));
            let want = PureState::plus_angle("out", Angle::new(t));
            let ws = sys.enumerate(w).map_err(e2s)?;
            let expected = 8usize.pow(n as u32) * 2usize.pow(n as u32) * 2;
            ensure(ws.len() == expected, || format!("n={n} θ={t}: {} branches, want {expected}", ws.len()))?;
            for w in &ws {
                let rho = w.state.reduced(&output_qubits(w, RSP_SERVER_OUT)).map_err(e2s)?;
                let f = delivered_fidelity(&rho, &want).map_err(e2s)?;
                ensure(f >= 1.0 - TOL, || format!("n={n} θ={t}: fidelity {f}"))?;
            }
            branches += ws.len();
        }
    }
    Ok(format!("{branches} branches over n in {{2,3}} and every θ in A"))
}

fn distinguish(json: &str, sim: SimulatorChoice) -> Result<(f64, usize), String> {
    let r = cmd_distinguish(&RunConfig::from_json(json).map_err(e2s)?, sim).map_err(e2s)?;
    Ok((r.epsilon, r.probes))
}

fn c6_rsp_dishonest_clients() -> Check {
    let mut probes = 0;
    for d in [2, 3] {
        let json = format!(r#"{{"protocol":"rsp","n":3,"k":1,"dishonest":[{d}]}}"#);
        let (eps, p) = distinguish(&json, SimulatorChoice::Matched)?;
        ensure(eps <= TOL, || format!("D = {{{d}}}: ε = {eps:e}"))?;
        let (naive, _) = distinguish(&json, SimulatorChoice::Naive)?;
        ensure(naive > 0.01, || format!("D = {{{d}}}: naive simulator not distinguished (ε = {naive:e})"))?;
        probes += p;
    }
    Ok(format!("ε ≤ 1e-10 over {probes} probes for D = {{2}} and {{3}}"))
}

fn c7_rsp_dishonest_server() -> Check {
    let json = r#"{"protocol":"rsp","n":2,"k":1,"server_honest":false}"#;
    let (eps, probes) = distinguish(json, SimulatorChoice::Matched)?;
    ensure(eps <= TOL, || format!("ε = {eps:e}"))?;
    let (naive, _) = distinguish(json, SimulatorChoice::Naive)?;
    ensure(naive > 0.01, || format!("naive simulator not distinguished (ε = {naive:e})"))?;
    Ok(format!("ε = {eps:.1e} over {probes} probes with quantum probing of both client registers"))
}

fn c8_protocol1_correctness() -> Check {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let cases = vec![
        ("vertex ψ_C", MeasurementPattern::identity(), psi_c("1")),
        (
            "vertex |−i⟩",
            MeasurementPattern::identity(),
            PureState::single("1", Complex64::new(h, 0.0), Complex64::new(0.0, -h)).unwrap(),
        ),
        ("edge ψ_C", MeasurementPattern::j_chain(&[Angle::new(3)]), psi_c("1")),
    ];
    let mut branches = 0;
    for (name, p, psi) in cases {
        let edge = p.graph.num_vertices() == 2;
        let inst = TrapInstance::new(p, psi.clone()).map_err(e2s)?;
        // The DT computation is J(0)·J(φ) = Zrot(φ) on the single edge, identity on a vertex.
        let oracle = if edge { psi.apply_gate(Gate::Zrot(Angle::new(3)), &["1".into()]).map_err(e2s)? } else { psi };
        for c in inst.colorings() {
            let want = inst.expected_output(c).map_err(e2s)?;
            let relabelled =
                PureState::from_amplitudes(want.labels().to_vec(), oracle.amplitudes().to_vec()).map_err(e2s)?;
            let f = want.fidelity(&relabelled).map_err(e2s)?;
            ensure(f >= 1.0 - TOL, || format!("{name}: pattern_unitary output off the oracle, fidelity {f}"))?;
        }
        let e = inst.evaluate_full(&PauliString::identity()).map_err(e2s)?;
        ensure((e.p_accept - 1.0).abs() <= TOL, || format!("{name}: abort probability {}", 1.0 - e.p_accept))?;
        ensure(e.rejected_branches == 0, || {
            format!("{name}: trap identity broken on {} branches", e.rejected_branches)
        })?;
        ensure(e.min_fidelity >= 1.0 - TOL, || format!("{name}: fidelity {}", e.min_fidelity))?;
        ensure(e.p_fail.abs() <= TOL, || format!("{name}: p_fail {}", e.p_fail))?;
        branches += e.branches;
    }
    // One engine run with the real machines on the single vertex.
    let inst = TrapInstance::new(MeasurementPattern::identity(), psi_c("1")).map_err(e2s)?;
    let sys = System::compose(vec![
        System::single(dqcsim::protocols::TrapClient::new(inst.clone())),
        System::single(dqcsim::protocols::TrapServer::new(&inst, PauliString::identity())),
    ])
    .map_err(e2s)?;
    let mut w = World::new();
    w.add_state(&psi_c("in")).map_err(e2s)?;
    w.inject(BLIND_CLIENT_IN, Message::quantum("psi", vec!["in".into()]));
    for w in sys.enumerate(w).map_err(e2s)? {
        let m = &w.outputs[BLIND_CLIENT_OUT][0];
        ensure(m.tag == "out", || "engine run aborted".into())?;
        let f = delivered_fidelity(&w.state.reduced(&m.qubits).map_err(e2s)?, &psi_c("x")).map_err(e2s)?;
        ensure(f >= 1.0 - TOL, || format!("engine fidelity {f}"))?;
    }
    Ok(format!("{branches} branches over all colourings and pads, no rejection"))
}

fn edge_instance() -> TrapInstance {
    TrapInstance::new(MeasurementPattern::j_chain(&[Angle::new(3)]), psi_c("1")).unwrap()
}

fn c9_verifiability_bound() -> Check {
    let cfg = RunConfig::from_json(r#"{"angles":[3]}"#).map_err(e2s)?;
    let (rows, report) = cmd_bound(&cfg, 2).map_err(e2s)?;
    ensure(rows.len() == 912, || format!("{} attacks, want 912", rows.len()))?;
    for r in &rows {
        ensure(r.p_fail <= r.bound + TOL, || format!("{}: p_fail {} > bound {}", r.attack, r.p_fail, r.bound))?;
        ensure(r.p_fail <= r.p_accept + TOL, || format!("{}: p_fail above p_accept", r.attack))?;
    }
    let s = &report.summary;
    ensure(s.max_p_fail <= 8.0 / 9.0 + TOL, || format!("max p_fail {} ({})", s.max_p_fail, s.max_p_fail_attack))?;
    ensure(s.max_bound <= 8.0 / 9.0 + TOL, || format!("max bound {} ({})", s.max_bound, s.max_bound_attack))?;
    ensure(s.max_bound > 0.5, || format!("sweep is vacuous: max bound {}", s.max_bound))?;
    // The sweep uses the reduced evaluator; cross-check the extremes on the full state.
    let inst = edge_instance();
    let labels = inst.dtg.labels().to_vec();
    let e = enumerate_e(&labels, &inst.input_row(), 2);
    for name in [&s.max_p_fail_attack, &s.max_bound_attack] {
        let op = e.iter().find(|p| &p.to_text() == name).ok_or_else(|| format!("{name} not enumerated"))?;
        let fast = simulate_attack(&inst, &PauliAttack::before_entangling(op.clone())).map_err(e2s)?;
        let full = simulate_attack_full(&inst, &PauliAttack::before_entangling(op.clone())).map_err(e2s)?;
        ensure((fast.p_fail - full.p_fail).abs() <= TOL && (fast.p_accept - full.p_accept).abs() <= TOL, || {
            format!("{name}: reduced {fast:?} vs full {full:?}")
        })?;
    }
    Ok(format!(
        "max p_fail = {:.6} ({}), max bound = {:.6} ({}), 912 attacks",
        s.max_p_fail, s.max_p_fail_attack, s.max_bound, s.max_bound_attack
    ))
}

fn ubqc_view(phis: &[i64]) -> System {
    let p = MeasurementPattern::j_chain(&phis.iter().map(|&k| Angle::new(k)).collect::<Vec<_>>());
    System::compose(vec![System::single(UbqcPsClient::new(p).unwrap()), System::single(Sink::new(BLIND_CLIENT_OUT))])
        .unwrap()
}

fn c10_blindness() -> Check {
    let outs = vec![UBQC_DELTA.to_string(), UBQC_QUBITS.to_string()];
    let mut probes = Vec::new();
    for s in 0..4 {
        probes.push(vec![
            OpenInput::quantum(BLIND_CLIENT_IN, "psi", 1),
            OpenInput::classical(UBQC_RESULT, "s", vec![s & 1]),
            OpenInput::classical(UBQC_RESULT, "s", vec![s >> 1]),
            OpenInput::quantum(UBQC_RETURN, "out", 1),
        ]);
    }
    let mut worst = 0.0f64;
    for (a, b) in [([0, 0], [3, 6]), ([1, 7], [4, 2])] {
        let d = distinguishability(&ubqc_view(&a), &outs, &ubqc_view(&b), &outs, &probes).map_err(e2s)?;
        worst = worst.max(d.epsilon);
        ensure(d.exact, || format!("UBQC {a:?} vs {b:?}: ε = {:e}", d.epsilon))?;
    }
    let g = Graph::path(3);
    let coloring = find_two_coloring(&g).map_err(|c| format!("odd cycle {:?}", c.0))?;
    let view = |x_black| -> Result<System, String> {
        let t = pattern_test(&g, &coloring, x_black).map_err(e2s)?;
        System::compose(vec![
            System::single(StabPsClient::new(t, Offsets::HalfCircle)),
            System::single(Sink::new(STAB_ACCEPT)),
        ])
        .map_err(e2s)
    };
    let outs = vec![STAB_QUBITS.to_string(), STAB_DELTA.to_string()];
    let probes: Vec<_> =
        (0..8i64).map(|m| (0..3).map(|i| OpenInput::classical(STAB_RESULT, "s", vec![m >> i & 1])).collect()).collect();
    let d = distinguishability(&view(false)?, &outs, &view(true)?, &outs, &probes).map_err(e2s)?;
    worst = worst.max(d.epsilon);
    ensure(d.exact, || format!("Protocol 3 T1 vs T2: ε = {:e}", d.epsilon))?;
    Ok(format!("UBQC angle pairs and Protocol 3 T1/T2 on 3-node patterns, max ε {worst:.1e}"))
}

fn c11_non_contribution() -> Check {
    let inst = edge_instance();
    let inputs: BTreeSet<QubitLabel> = inst.input_row().into_iter().collect();
    let free: Vec<QubitLabel> = inst.dtg.labels().iter().filter(|l| !inputs.contains(*l)).cloned().collect();
    let mut attacks = Vec::new();
    for i in 0..free.len() {
        attacks.push(PauliString::single(free[i].clone(), Pauli::X));
        for j in i + 1..free.len() {
            attacks.push(PauliString::from_letters([(free[i].clone(), Pauli::X), (free[j].clone(), Pauli::X)]));
        }
    }
    ensure(attacks.len() == 78, || format!("{} attacks, want 78", attacks.len()))?;
    let mut worst = 0.0f64;
    for a in &attacks {
        let r = simulate_attack(&inst, &PauliAttack::before_entangling(a.clone())).map_err(e2s)?;
        worst = worst.max(r.p_fail);
        ensure(r.p_fail.abs() <= TOL, || format!("{}: p_fail {}", a.to_text(), r.p_fail))?;
    }
    for a in [&attacks[0], attacks.last().unwrap()] {
        let r = simulate_attack_full(&inst, &PauliAttack::before_entangling(a.clone())).map_err(e2s)?;
        ensure(r.p_fail.abs() <= TOL, || format!("{} on the full state: p_fail {}", a.to_text(), r.p_fail))?;
    }
    Ok(format!("78 attacks, max p_fail {worst:.1e}"))
}

fn c12_determinism() -> Check {
    let configs = [
        r#"{"protocol":"rsp","n":3,"theta":5}"#,
        r#"{"protocol":"ubqc","angles":[3,6]}"#,
        r#"{"protocol":"protocol1","angles":[3],"attack":{"1:0":"Z"}}"#,
        r#"{"protocol":"protocol3","angles":[4],"k":1}"#,
    ];
    for json in configs {
        let cfg = RunConfig::from_json(json).map_err(e2s)?;
        let runs: Vec<String> =
            (0..3).map(|_| cmd_run(&cfg, None, Some(7)).map(|r| r.to_json())).collect::<Result<_, _>>().map_err(e2s)?;
        ensure(runs[0] == runs[1] && runs[1] == runs[2], || format!("{json}: transcripts differ"))?;
        ensure(runs[0].contains("\"transcript\": [\n"), || format!("{json}: empty transcript"))?;
    }
    let dir = std::env::temp_dir().join(format!("dqcsim-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(e2s)?;
    let path = dir.join("rsp.json");
    std::fs::write(&path, configs[0]).map_err(e2s)?;
    let mut outs = Vec::new();
    for _ in 0..3 {
        let o = Command::new(env!("CARGO_BIN_EXE_dqcsim"))
            .args(["run", "--seed", "7", "--json", "--config"])
            .arg(&path)
            .output()
            .map_err(e2s)?;
        ensure(o.status.code() == Some(0), || format!("binary exited with {:?}", o.status.code()))?;
        outs.push(o.stdout);
    }
    ensure(outs[0] == outs[1] && outs[1] == outs[2], || "binary transcripts differ".into())?;
    Ok(format!("4 protocols through the library and rsp through the binary ({} bytes)", outs[0].len()))
}

fn main() {
    let criteria: Vec<(usize, &str, fn() -> Check)> = vec![
        (1, "graph-state stabilizer suite", c1_stabilizer_suite),
        (2, "stabilizer tests accept an honest server", c2_honest_stabilizer_tests),
        (3, "RM and PS detection agree under weight-1 attacks", c3_rm_ps_equivalence),
        (4, "sigma_S simulator equality", c4_sigma_s),
        (5, "RSP correctness", c5_rsp_correctness),
        (6, "RSP against dishonest clients", c6_rsp_dishonest_clients),
        (7, "RSP against a dishonest server", c7_rsp_dishonest_server),
        (8, "Protocol 1 correctness", c8_protocol1_correctness),
        (9, "verifiability bound 8/9", c9_verifiability_bound),
        (10, "blindness marginals", c10_blindness),
        (11, "I/X-only attacks never cause failure", c11_non_contribution),
        (12, "deterministic transcripts", c12_determinism),
    ];
    let only: BTreeSet<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("PASS [{n:>2}] {name}: {detail} ({secs:.1} s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL [{n:>2}] {name}: {why} ({secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
