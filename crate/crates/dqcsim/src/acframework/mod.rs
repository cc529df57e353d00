//! Interactive systems of party machines, ideal resources and filters, exact
//! channel extraction and distinguishability.

mod channel;
mod engine;
mod ideal;
mod transcript;

pub use channel::{
    choi_distance, distinguishability, extract_channel, probe_grid, Choi, Distinguishability, OpenInput, Probe,
    EXACT_TOL, MAX_CHOI_QUBITS,
};
pub use engine::{party_rng, Cx, Direction, Interface, Machine, Memory, Message, System, World};
pub use ideal::{
    ideal_rsp, ideal_s_blind, ideal_s_ver, output_qubits, rsp_input_port, rsp_theta_port, HonestClientFilter,
    HonestServerFilter, IdealDelegation, IdealRsp, Relay, Sink, BLIND_CLIENT_IN, BLIND_CLIENT_OUT, BLIND_SERVER_IN,
    BLIND_SERVER_LEAK, BLIND_SERVER_OUT, RSP_SERVER_OUT,
};
pub use transcript::{
    fingerprint, transcript_json, unrecorded_fingerprint, PayloadKind, TranscriptEntry, FINGERPRINT_MAX_QUBITS,
    FINGERPRINT_QUANTUM,
};

use crate::error::Result;
use crate::qstate::{MixedState, PureState};

/// Branch-averaged state of the qubits delivered on `port`, with the
/// accumulated probability of worlds that delivered anything there.
pub fn delivered_state(worlds: &[World], port: &str) -> Result<(f64, Option<MixedState>)> {
    let mut items = Vec::new();
    for w in worlds {
        let qs = output_qubits(w, port);
        if qs.is_empty() {
            continue;
        }
        let rho = w.state.reduced(&qs)?;
        let canon: Vec<_> = (0..qs.len()).map(|i| crate::qstate::QubitLabel::new(format!("out{i}"))).collect();
        items.push((w.prob, MixedState::new_unchecked(canon, rho.matrix().clone())));
    }
    let total: f64 = items.iter().map(|(p, _)| p).sum();
    if items.is_empty() {
        return Ok((0.0, None));
    }
    let mut m = items[0].1.matrix() * num_complex::Complex64::new(items[0].0 / total, 0.0);
    for (p, r) in &items[1..] {
        m += r.matrix() * num_complex::Complex64::new(p / total, 0.0);
    }
    Ok((total, Some(MixedState::new_unchecked(items[0].1.labels().to_vec(), m))))
}

/// Fidelity of a delivered state with a pure reference over the same register size.
pub fn delivered_fidelity(rho: &MixedState, psi: &PureState) -> Result<f64> {
    let relabelled = PureState::from_amplitudes(rho.labels().to_vec(), psi.amplitudes().to_vec())?;
    rho.overlap(&relabelled)
}
