//! Pauli attacks: class `E` enumeration, exact failure statistics against
//! trap-based verification, the trap-overlap bound and stabilizer-test
//! detection.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DqcError, Result};
use crate::graphstate::Graph;
use crate::protocols::{pad_angle, ps_detection, rm_detection, stab_to_ps, Offsets, TrapInstance};
use crate::qstate::{Angle, Pauli, PauliString, PureState, QubitLabel};

/// Point in the run at which the server applies its attack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackStage {
    BeforeEntangling,
    AfterEntangling,
    PerNodeBeforeSend,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PauliAttack {
    pub stage: AttackStage,
    pub op: PauliString,
}

impl PauliAttack {
    pub fn before_entangling(op: PauliString) -> PauliAttack {
        PauliAttack { stage: AttackStage::BeforeEntangling, op }
    }
}

impl fmt::Display for PauliAttack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.op.to_text())
    }
}

/// Membership in `E`: some `Y` or `Z` anywhere, or an `X` on an input label.
pub fn in_class_e(p: &PauliString, inputs: &BTreeSet<QubitLabel>) -> bool {
    p.letters().iter().any(|(l, &q)| q == Pauli::Y || q == Pauli::Z || (q == Pauli::X && inputs.contains(l)))
}

/// Every Pauli string of weight `1..=max_weight` over `labels` that lies in `E`.
pub fn enumerate_e(labels: &[QubitLabel], inputs: &[QubitLabel], max_weight: usize) -> Vec<PauliString> {
    let inputs: BTreeSet<QubitLabel> = inputs.iter().cloned().collect();
    let mut labels: Vec<QubitLabel> = labels.to_vec();
    labels.sort();
    labels.dedup();
    let mut out = Vec::new();
    let mut cur = PauliString::identity();
    fn walk(
        labels: &[QubitLabel],
        from: usize,
        left: usize,
        cur: &mut PauliString,
        inputs: &BTreeSet<QubitLabel>,
        out: &mut Vec<PauliString>,
    ) {
        if !cur.is_identity() && in_class_e(cur, inputs) {
            out.push(cur.clone());
        }
        if left == 0 {
            return;
        }
        for i in from..labels.len() {
            for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                cur.set(labels[i].clone(), p);
                walk(labels, i + 1, left - 1, cur, inputs, out);
            }
            cur.set(labels[i].clone(), Pauli::I);
        }
    }
    walk(&labels, 0, max_weight, &mut cur, &inputs, &mut out);
    out
}

/// Exact outcome of one attack.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailReport {
    pub attack: String,
    pub p_accept: f64,
    pub p_fail: f64,
    pub bound: f64,
}

impl FailReport {
    pub fn within_bound(&self) -> bool {
        self.p_fail <= self.bound + 1e-10
    }
}

fn before_entangling_only(attack: &PauliAttack) -> Result<()> {
    if attack.stage != AttackStage::BeforeEntangling {
        return Err(DqcError::Precondition(format!(
            "trap verification attacks act before entangling, got {:?}",
            attack.stage
        )));
    }
    Ok(())
}

/// Exact failure statistics of `attack` on `inst`, averaged over every
/// colouring, pad and measurement branch.
pub fn simulate_attack(inst: &TrapInstance, attack: &PauliAttack) -> Result<FailReport> {
    before_entangling_only(attack)?;
    let e = inst.evaluate_fast(&attack.op)?;
    Ok(FailReport {
        attack: attack.to_string(),
        p_accept: e.p_accept,
        p_fail: e.p_fail,
        bound: bound_expression(inst, &attack.op)?,
    })
}

/// As [`simulate_attack`], on the full resource-state vector.
pub fn simulate_attack_full(inst: &TrapInstance, attack: &PauliAttack) -> Result<FailReport> {
    before_entangling_only(attack)?;
    let e = inst.evaluate_full(&attack.op)?;
    Ok(FailReport {
        attack: attack.to_string(),
        p_accept: e.p_accept,
        p_fail: e.p_fail,
        bound: bound_expression(inst, &attack.op)?,
    })
}

/// Averaged squared overlap `Σ_θ (1/|Θ|) ⟨+^θ|σ|+^θ⟩²` of one trap.
pub fn trap_factor(sigma: Pauli, thetas: &[Angle]) -> Result<f64> {
    let mut f = 0.0;
    for &t in thetas {
        let psi = PureState::plus_angle("t", t);
        f += psi.expectation(&PauliString::single("t", sigma))?.norm_sqr();
    }
    Ok(f / thetas.len() as f64)
}

/// Trap-placement average of the product over traps of averaged squared
/// overlaps. Input-row traps carry a quarter-turn pad, the others sit in
/// `|±⟩`.
pub fn bound_expression(inst: &TrapInstance, attack: &PauliString) -> Result<f64> {
    let row: BTreeSet<QubitLabel> = inst.input_row().into_iter().collect();
    let quarter: Vec<Angle> = (0..4).map(pad_angle).collect();
    let plus_minus = [Angle::ZERO, Angle::PI];
    let mut total = 0.0;
    for c in inst.colorings() {
        let mut prod = 1.0;
        for t in &c.traps {
            let thetas: &[Angle] = if row.contains(t) { &quarter } else { &plus_minus };
            prod *= trap_factor(attack.get(t), thetas)?;
        }
        total += prod;
    }
    Ok(total / inst.colorings().len() as f64)
}

/// The test a stabilizer element is checked with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabTestKind {
    /// Receive-and-measure: the server sends the attacked graph state.
    Rm,
    /// Prepare-and-send with offsets in `{0, π}`; the attack hits the
    /// received qubits before entangling.
    Ps,
}

/// Exact rejection probability of the test of `stab` under `attack`.
pub fn detection_probability(kind: StabTestKind, g: &Graph, stab: &PauliString, attack: &PauliString) -> Result<f64> {
    let test = stab_to_ps(g, stab)?;
    match kind {
        StabTestKind::Rm => rm_detection(&test, attack),
        StabTestKind::Ps => ps_detection(&test, attack, Offsets::Flips),
    }
}

/// Sweep summary over a list of reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub attacks: usize,
    pub max_p_fail: f64,
    pub max_p_fail_attack: String,
    pub max_bound: f64,
    pub max_bound_attack: String,
    pub bound_violations: usize,
}

/// Every class `E` attack up to `max_weight`, simulated and bounded.
pub fn sweep(inst: &TrapInstance, max_weight: usize) -> Result<Vec<FailReport>> {
    let labels = inst.dtg.labels().to_vec();
    enumerate_e(&labels, &inst.input_row(), max_weight)
        .into_iter()
        .map(|op| simulate_attack(inst, &PauliAttack::before_entangling(op)))
        .collect()
}

pub fn summarize(reports: &[FailReport]) -> SweepSummary {
    let mut s = SweepSummary {
        attacks: reports.len(),
        max_p_fail: 0.0,
        max_p_fail_attack: String::new(),
        max_bound: 0.0,
        max_bound_attack: String::new(),
        bound_violations: 0,
    };
    for r in reports {
        if r.p_fail > s.max_p_fail || s.max_p_fail_attack.is_empty() {
            s.max_p_fail = r.p_fail;
            s.max_p_fail_attack = r.attack.clone();
        }
        if r.bound > s.max_bound || s.max_bound_attack.is_empty() {
            s.max_bound = r.bound;
            s.max_bound_attack = r.attack.clone();
        }
        if !r.within_bound() {
            s.bound_violations += 1;
        }
    }
    s
}

/// CSV with header `attack,p_accept,p_fail,bound`.
pub fn sweep_csv(reports: &[FailReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(r).map_err(|e| DqcError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| DqcError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| DqcError::Io(e.to_string()))
}
