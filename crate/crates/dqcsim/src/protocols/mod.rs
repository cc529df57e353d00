//! Party machines for blind delegation, trap-based verification, collective
//! remote state preparation and stabilizer testing, with their simulators.

mod protocol3;
mod rsp;
mod stab;
mod trap;
mod ubqc;

pub use protocol3::{protocol3_oracle, protocol3_system, Protocol3Client, RoundKind, StabRoundPlan, P3_OUTPUT};

pub use rsp::{
    rsp_ideal, rsp_qubit_port, rsp_real, rsp_report_port, RspClient, RspClientSimulator, RspLeadClient, RspServer,
    RspServerSimulator, RspTranscript, RSP_CORRECTION,
};

pub use stab::{
    pattern_test, ps_detection, rm_detection, stab_to_ps, Offsets, ParityCheck, PrepInstruction, RmStabClient, SigmaS,
    StabPsClient, StabRmServer, StabServer, StabTest, STAB_ACCEPT, STAB_DELTA, STAB_QUBITS, STAB_RESULT, STAB_RM_FLIPS,
    STAB_RM_QUBITS,
};

pub use trap::{pad_angle, TrapClient, TrapEvaluation, TrapInstance, TrapPad, TrapServer, TRAP_GRAPH, TRAP_INPUT};

pub use ubqc::{
    BlindRmClient, BlindRmServer, UbqcPsClient, UbqcPsServer, RM_INPUT, RM_NODE, UBQC_DELTA, UBQC_QUBITS, UBQC_RESULT,
    UBQC_RETURN,
};

use crate::acframework::System;
use crate::error::Result;
use crate::mbqc::MeasurementPattern;

/// Honest UBQC client and server wired together.
pub fn ubqc_ps_system(p: &MeasurementPattern) -> Result<System> {
    System::compose(vec![System::single(UbqcPsClient::new(p.clone())?), System::single(UbqcPsServer::new(p.clone()))])
}

/// Honest blind receive-and-measure client and server wired together.
pub fn blind_rm_system(p: &MeasurementPattern) -> Result<System> {
    System::compose(vec![System::single(BlindRmClient::new(p.clone())?), System::single(BlindRmServer::new(p.clone()))])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acframework::{
        delivered_fidelity, distinguishability, output_qubits, Message, OpenInput, Sink, World, BLIND_CLIENT_IN,
        BLIND_CLIENT_OUT,
    };
    use crate::mbqc::pattern_unitary;
    use crate::qstate::{Angle, PureState};
    use num_complex::Complex64;

    fn inputs() -> Vec<PureState> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        vec![
            PureState::z_basis("in", 0),
            PureState::z_basis("in", 1),
            PureState::single("in", Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap(),
            PureState::single("in", Complex64::new(h, 0.0), Complex64::new(-0.5, 0.5)).unwrap(),
        ]
    }

    fn expected(p: &MeasurementPattern, input: &PureState) -> PureState {
        let u = pattern_unitary(p).unwrap();
        let amps = (&u * nalgebra::DVector::from_vec(input.amplitudes().to_vec())).as_slice().to_vec();
        PureState::from_amplitudes(vec!["out".into()], amps).unwrap()
    }

    fn check_every_branch(sys: &System, p: &MeasurementPattern) {
        for input in inputs() {
            let want = expected(p, &input);
            let mut w = World::new();
            w.add_state(&input).unwrap();
            w.inject(BLIND_CLIENT_IN, Message::quantum("psi", vec!["in".into()]));
            let ws = sys.enumerate(w).unwrap();
            let total: f64 = ws.iter().map(|w| w.prob).sum();
            assert!((total - 1.0).abs() < 1e-9, "total probability {total}");
            for w in &ws {
                let q = output_qubits(w, BLIND_CLIENT_OUT);
                let rho = w.state.reduced(&q).unwrap();
                let rho = crate::qstate::MixedState::from_matrix(vec!["out".into()], rho.matrix().clone()).unwrap();
                let f = delivered_fidelity(&rho, &want).unwrap();
                assert!(f > 1.0 - 1e-10, "fidelity {f}");
            }
        }
    }

    #[test]
    fn ubqc_honest_matches_pattern_unitary() {
        for phis in [vec![Angle::new(3), Angle::new(6)], vec![Angle::ZERO, Angle::new(5)]] {
            let p = MeasurementPattern::j_chain(&phis);
            check_every_branch(&ubqc_ps_system(&p).unwrap(), &p);
        }
        let id = MeasurementPattern::identity();
        check_every_branch(&ubqc_ps_system(&id).unwrap(), &id);
    }

    #[test]
    fn blind_rm_honest_matches_pattern_unitary() {
        for phis in [vec![Angle::new(1)], vec![Angle::new(7), Angle::new(2)]] {
            let p = MeasurementPattern::j_chain(&phis);
            check_every_branch(&blind_rm_system(&p).unwrap(), &p);
        }
        let id = MeasurementPattern::identity();
        check_every_branch(&blind_rm_system(&id).unwrap(), &id);
    }

    #[test]
    fn blind_rm_server_sees_no_angles() {
        let p = MeasurementPattern::j_chain(&[Angle::new(3), Angle::new(1)]);
        let sys = blind_rm_system(&p).unwrap();
        let mut w = World::new().recording();
        w.add_state(&PureState::plus("in")).unwrap();
        w.inject(BLIND_CLIENT_IN, Message::quantum("psi", vec!["in".into()]));
        for w in sys.enumerate(w).unwrap() {
            for e in w.transcript.as_ref().unwrap() {
                if e.to_interface == RM_INPUT {
                    assert!(e.payload["values"].as_array().unwrap().is_empty());
                }
            }
        }
    }

    fn ubqc_client_view(p: &MeasurementPattern) -> System {
        System::compose(vec![
            System::single(UbqcPsClient::new(p.clone()).unwrap()),
            System::single(Sink::new(BLIND_CLIENT_OUT)),
        ])
        .unwrap()
    }

    #[test]
    fn ubqc_server_marginal_is_independent_of_the_computation() {
        let a = MeasurementPattern::j_chain(&[Angle::new(0), Angle::new(0)]);
        let b = MeasurementPattern::j_chain(&[Angle::new(3), Angle::new(6)]);
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
        let d = distinguishability(&ubqc_client_view(&a), &outs, &ubqc_client_view(&b), &outs, &probes).unwrap();
        assert!(d.exact, "ε = {}", d.epsilon);
    }
}
