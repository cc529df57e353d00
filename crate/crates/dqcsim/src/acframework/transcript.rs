use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::engine::Message;
use crate::qstate::MixedState;

/// Quantisation step for state fingerprints.
pub const FINGERPRINT_QUANTUM: f64 = 1e-12;

/// Largest register whose reduced state is fingerprinted in transcripts.
pub const FINGERPRINT_MAX_QUBITS: usize = 10;

/// Stand-in fingerprint for registers above [`FINGERPRINT_MAX_QUBITS`].
pub fn unrecorded_fingerprint(qubits: usize) -> String {
    format!("unrecorded:{qubits}-qubits")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    Classical,
    Quantum,
}

/// One delivered message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub round: usize,
    pub from_interface: String,
    pub to_interface: String,
    pub kind: PayloadKind,
    pub payload: serde_json::Value,
}

impl TranscriptEntry {
    pub fn new(round: usize, from: &str, to: &str, msg: &Message, fingerprint: Option<String>) -> TranscriptEntry {
        let (kind, payload) = match fingerprint {
            None => (PayloadKind::Classical, serde_json::json!({ "tag": msg.tag, "values": msg.classical })),
            Some(fp) => (
                PayloadKind::Quantum,
                serde_json::json!({
                    "tag": msg.tag,
                    "values": msg.classical,
                    "qubits": msg.qubits.len(),
                    "fingerprint": fp,
                }),
            ),
        };
        TranscriptEntry { round, from_interface: from.to_string(), to_interface: to.to_string(), kind, payload }
    }
}

/// SHA-256 over the density matrix entries rounded to [`FINGERPRINT_QUANTUM`].
pub fn fingerprint(rho: &MixedState) -> String {
    let mut h = Sha256::new();
    let m = rho.matrix();
    h.update((m.nrows() as u64).to_le_bytes());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            for x in [m[(r, c)].re, m[(r, c)].im] {
                let q = (x / FINGERPRINT_QUANTUM).round() as i64;
                h.update(q.to_le_bytes());
            }
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Transcript as pretty JSON with a trailing newline.
pub fn transcript_json(entries: &[TranscriptEntry]) -> String {
    let mut s = serde_json::to_string_pretty(entries).expect("serialisable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::PureState;

    #[test]
    fn fingerprint_ignores_global_phase_and_sub_quantum_noise() {
        let a = PureState::plus("q").to_mixed();
        let b = PureState::plus_angle("q", crate::qstate::Angle::ZERO).to_mixed();
        assert_eq!(fingerprint(&a), fingerprint(&b));
        let c = PureState::z_basis("q", 0).to_mixed();
        assert_ne!(fingerprint(&a), fingerprint(&c));
        assert_eq!(fingerprint(&a).len(), 64);
    }

    #[test]
    fn entry_json_shape() {
        let e = TranscriptEntry::new(3, "client", "server.in", &Message::classical("delta", vec![5]), None);
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["kind"], "classical");
        assert_eq!(v["payload"]["values"][0], 5);
    }
}
