//! Dense state engine over small labelled qubit registers.

mod angle;
mod gate;
mod label;
mod mixed;
mod pauli;
mod pure;

use std::collections::BTreeSet;

pub use angle::Angle;
pub use gate::Gate;
pub use label::{labels, QubitLabel};
pub use mixed::{hermitian_eigenvalues, state_distance, trace_norm, MixedState};
pub use pauli::{Pauli, PauliString};
pub use pure::{Branch, PureState};

use crate::error::{DqcError, Result};

/// Largest register the dense engine accepts.
pub const MAX_QUBITS: usize = 16;
/// Tolerance on normalisation and Hermiticity.
pub const NORM_TOL: f64 = 1e-12;
/// Branches with probability at or below this are treated as impossible.
pub const ZERO_PROB: f64 = 1e-20;

pub(crate) fn check_labels(labels: &[QubitLabel]) -> Result<()> {
    if labels.len() > MAX_QUBITS {
        return Err(DqcError::SizeCap(labels.len(), MAX_QUBITS));
    }
    let mut seen = BTreeSet::new();
    for l in labels {
        if !seen.insert(l) {
            return Err(DqcError::DuplicateLabel(l.0.clone()));
        }
    }
    Ok(())
}

/// Apply `gate` and return the new state.
pub fn apply_gate(state: &PureState, gate: Gate, targets: &[QubitLabel]) -> Result<PureState> {
    state.apply_gate(gate, targets)
}

/// Apply a Pauli string including its phase.
pub fn apply_pauli(state: &PureState, p: &PauliString) -> Result<PureState> {
    state.apply_pauli(p)
}

pub fn measure_xy(state: &PureState, label: &QubitLabel, delta: Angle) -> Result<Vec<Branch>> {
    state.measure_xy(label, delta)
}

pub fn measure_z(state: &PureState, label: &QubitLabel) -> Result<Vec<Branch>> {
    state.measure_z(label)
}

pub fn measure_x(state: &PureState, label: &QubitLabel) -> Result<Vec<Branch>> {
    state.measure_x(label)
}

pub fn measure_pauli(state: &PureState, p: &PauliString) -> Result<Vec<Branch>> {
    state.measure_pauli(p)
}

pub fn partial_trace(m: &MixedState, discard: &[QubitLabel]) -> Result<MixedState> {
    m.partial_trace(discard)
}

/// `|⟨a|b⟩|²` for pure states.
pub fn fidelity(a: &PureState, b: &PureState) -> Result<f64> {
    a.fidelity(b)
}
