use nalgebra::DMatrix;
use num_complex::Complex64;

use super::angle::Angle;
use super::gate::Gate;
use super::label::QubitLabel;
use super::mixed::MixedState;
use super::pauli::{Pauli, PauliString};
use super::{check_labels, NORM_TOL, ZERO_PROB};
use crate::error::{DqcError, Result};

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Normalised state vector over an ordered list of labelled qubits.
///
/// The first label is the most significant bit of the amplitude index.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    labels: Vec<QubitLabel>,
    amps: Vec<Complex64>,
}

/// One outcome of a measurement.
#[derive(Clone, Debug)]
pub struct Branch {
    pub outcome: u8,
    pub probability: f64,
    /// Renormalised post-measurement state; `None` for a zero-probability outcome.
    pub state: Option<PureState>,
}

impl PureState {
    /// The zero-qubit state (the scalar 1).
    pub fn scalar() -> PureState {
        PureState { labels: Vec::new(), amps: vec![C1] }
    }

    pub fn from_amplitudes(labels: Vec<QubitLabel>, amps: Vec<Complex64>) -> Result<PureState> {
        check_labels(&labels)?;
        if amps.len() != 1usize << labels.len() {
            return Err(DqcError::Dimension(format!("{} amplitudes for {} qubits", amps.len(), labels.len())));
        }
        let s = PureState { labels, amps };
        let n = s.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(DqcError::NotNormalised(n));
        }
        Ok(s)
    }

    /// Build from amplitudes and rescale to unit norm.
    pub fn normalised(labels: Vec<QubitLabel>, mut amps: Vec<Complex64>) -> Result<PureState> {
        let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if n <= ZERO_PROB {
            return Err(DqcError::NotNormalised(n));
        }
        let s = 1.0 / n.sqrt();
        amps.iter_mut().for_each(|a| *a *= s);
        PureState::from_amplitudes(labels, amps)
    }

    pub fn basis(labels: Vec<QubitLabel>, bits: &[u8]) -> Result<PureState> {
        check_labels(&labels)?;
        if bits.len() != labels.len() {
            return Err(DqcError::Dimension("bit string length".into()));
        }
        let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b as usize & 1));
        let mut amps = vec![C0; 1 << labels.len()];
        amps[idx] = C1;
        Ok(PureState { labels, amps })
    }

    pub fn zero(labels: Vec<QubitLabel>) -> Result<PureState> {
        let bits = vec![0; labels.len()];
        PureState::basis(labels, &bits)
    }

    /// `a0|0⟩ + a1|1⟩` on one qubit.
    pub fn single(label: impl Into<QubitLabel>, a0: Complex64, a1: Complex64) -> Result<PureState> {
        PureState::from_amplitudes(vec![label.into()], vec![a0, a1])
    }

    /// Computational basis state `|r⟩`.
    pub fn z_basis(label: impl Into<QubitLabel>, r: u8) -> PureState {
        let (a0, a1) = if r & 1 == 0 { (C1, C0) } else { (C0, C1) };
        PureState { labels: vec![label.into()], amps: vec![a0, a1] }
    }

    /// `|±^δ⟩ = (|0⟩ ± e^{iδ}|1⟩)/√2`; `outcome` selects the sign.
    pub fn xy_basis(label: impl Into<QubitLabel>, delta: Angle, outcome: u8) -> PureState {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let ph = (delta + Angle::pi_times(outcome)).phase();
        PureState { labels: vec![label.into()], amps: vec![Complex64::new(h, 0.0), ph * h] }
    }

    pub fn plus(label: impl Into<QubitLabel>) -> PureState {
        PureState::xy_basis(label, Angle::ZERO, 0)
    }

    /// `|+^θ⟩`.
    pub fn plus_angle(label: impl Into<QubitLabel>, theta: Angle) -> PureState {
        PureState::xy_basis(label, theta, 0)
    }

    /// Eigenstate of a single Pauli with eigenvalue `(-1)^outcome`.
    pub fn pauli_eigenstate(label: impl Into<QubitLabel>, p: Pauli, outcome: u8) -> Result<PureState> {
        match p {
            Pauli::X => Ok(PureState::xy_basis(label, Angle::ZERO, outcome)),
            Pauli::Y => Ok(PureState::xy_basis(label, Angle::PI_2, outcome)),
            Pauli::Z => Ok(PureState::z_basis(label, outcome)),
            Pauli::I => Err(DqcError::IdentityMeasurement),
        }
    }

    /// `(|00⟩ + |11⟩)/√2`.
    pub fn epr(a: impl Into<QubitLabel>, b: impl Into<QubitLabel>) -> Result<PureState> {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        PureState::from_amplitudes(vec![a.into(), b.into()], vec![h, C0, C0, h])
    }

    pub fn labels(&self) -> &[QubitLabel] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn contains(&self, label: &QubitLabel) -> bool {
        self.labels.contains(label)
    }

    pub fn position(&self, label: &QubitLabel) -> Result<usize> {
        self.labels.iter().position(|l| l == label).ok_or_else(|| DqcError::UnknownLabel(label.0.clone()))
    }

    fn mask(&self, label: &QubitLabel) -> Result<usize> {
        let p = self.position(label)?;
        Ok(1usize << (self.labels.len() - 1 - p))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        check_labels(&labels)?;
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(PureState { labels, amps })
    }

    pub fn tensor_all<'a, I: IntoIterator<Item = &'a PureState>>(states: I) -> Result<PureState> {
        states.into_iter().try_fold(PureState::scalar(), |acc, s| acc.tensor(s))
    }

    pub fn apply_gate(&self, gate: Gate, targets: &[QubitLabel]) -> Result<PureState> {
        let mut s = self.clone();
        s.apply_gate_mut(gate, targets)?;
        Ok(s)
    }

    pub fn apply_gate_mut(&mut self, gate: Gate, targets: &[QubitLabel]) -> Result<()> {
        if targets.len() != gate.arity() {
            return Err(DqcError::Arity { gate: gate.to_string(), expected: gate.arity(), got: targets.len() });
        }
        match gate {
            Gate::CZ => {
                let (m1, m2) = (self.mask(&targets[0])?, self.mask(&targets[1])?);
                if m1 == m2 {
                    return Err(DqcError::DuplicateLabel(targets[0].0.clone()));
                }
                let both = m1 | m2;
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & both == both {
                        *a = -*a;
                    }
                }
                Ok(())
            }
            Gate::Z | Gate::Zrot(_) => {
                let m = self.mask(&targets[0])?;
                let ph = match gate {
                    Gate::Zrot(a) => a.phase(),
                    _ => -C1,
                };
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & m != 0 {
                        *a *= ph;
                    }
                }
                Ok(())
            }
            _ => self.apply_matrix_mut(&gate.matrix(), targets),
        }
    }

    /// Apply an arbitrary `2^k × 2^k` row-major matrix to `targets`.
    ///
    /// The result is not renormalised, so Kraus operators can use it.
    pub fn apply_matrix_mut(&mut self, m: &[Complex64], targets: &[QubitLabel]) -> Result<()> {
        let k = targets.len();
        let d = 1usize << k;
        if m.len() != d * d {
            return Err(DqcError::Dimension(format!("matrix of {} entries for {k} targets", m.len())));
        }
        let masks: Vec<usize> = targets.iter().map(|t| self.mask(t)).collect::<Result<_>>()?;
        let all = masks.iter().fold(0usize, |a, &b| a | b);
        if all.count_ones() as usize != k {
            return Err(DqcError::DuplicateLabel("repeated target".into()));
        }
        let offsets: Vec<usize> = (0..d)
            .map(|sub| {
                masks
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| sub >> (k - 1 - j) & 1 == 1)
                    .fold(0usize, |acc, (_, &mk)| acc | mk)
            })
            .collect();
        let mut buf = vec![C0; d];
        for base in 0..self.amps.len() {
            if base & all != 0 {
                continue;
            }
            for (r, slot) in buf.iter_mut().enumerate() {
                let mut acc = C0;
                for (c, off) in offsets.iter().enumerate() {
                    acc += m[r * d + c] * self.amps[base | off];
                }
                *slot = acc;
            }
            for (r, off) in offsets.iter().enumerate() {
                self.amps[base | off] = buf[r];
            }
        }
        Ok(())
    }

    pub fn apply_pauli(&self, p: &PauliString) -> Result<PureState> {
        let mut s = self.clone();
        s.apply_pauli_mut(p)?;
        Ok(s)
    }

    pub fn apply_pauli_mut(&mut self, p: &PauliString) -> Result<()> {
        let mut xmask = 0usize;
        let mut zmask = 0usize;
        let mut ycount = 0u8;
        for (l, &q) in p.letters() {
            let m = self.mask(l)?;
            if q.has_x() {
                xmask |= m;
            }
            if q.has_z() {
                zmask |= m;
            }
            if q == Pauli::Y {
                ycount += 1;
            }
        }
        // Y = i·X·Z, so the string is i^(phase + #Y) · X^x Z^z.
        let global = PauliString::identity().with_phase(p.phase_power() + ycount).phase();
        let old = self.amps.clone();
        for (i, a) in old.iter().enumerate() {
            let sign = if (i & zmask).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            self.amps[i ^ xmask] = a * global * sign;
        }
        Ok(())
    }

    /// Project `label` onto the single-qubit ket `ket` and drop it.
    ///
    /// Returns the unnormalised remainder.
    pub fn project_out(&self, label: &QubitLabel, ket: [Complex64; 2]) -> Result<Vec<Complex64>> {
        let p = self.position(label)?;
        let n = self.labels.len();
        let b = n - 1 - p;
        let low = (1usize << b) - 1;
        let (c0, c1) = (ket[0].conj(), ket[1].conj());
        let half = self.amps.len() / 2;
        let mut out = Vec::with_capacity(half);
        for j in 0..half {
            let i0 = ((j & !low) << 1) | (j & low);
            let i1 = i0 | (1 << b);
            out.push(c0 * self.amps[i0] + c1 * self.amps[i1]);
        }
        Ok(out)
    }

    fn without(&self, label: &QubitLabel) -> Vec<QubitLabel> {
        self.labels.iter().filter(|l| *l != label).cloned().collect()
    }

    /// Measure `label` in the given orthonormal single-qubit basis; the qubit is consumed.
    pub fn measure_basis(&self, label: &QubitLabel, basis: [[Complex64; 2]; 2]) -> Result<Vec<Branch>> {
        let rest = self.without(label);
        let mut out = Vec::with_capacity(2);
        for (r, ket) in basis.iter().enumerate() {
            let amps = self.project_out(label, *ket)?;
            let prob: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            let state = if prob > ZERO_PROB {
                let s = 1.0 / prob.sqrt();
                Some(PureState { labels: rest.clone(), amps: amps.into_iter().map(|a| a * s).collect() })
            } else {
                None
            };
            out.push(Branch { outcome: r as u8, probability: prob, state });
        }
        Ok(out)
    }

    /// Measure in `{|+^δ⟩, |−^δ⟩}`; outcome 1 is `|−^δ⟩`.
    pub fn measure_xy(&self, label: &QubitLabel, delta: Angle) -> Result<Vec<Branch>> {
        let p = PureState::xy_basis("_", delta, 0).amps;
        let m = PureState::xy_basis("_", delta, 1).amps;
        self.measure_basis(label, [[p[0], p[1]], [m[0], m[1]]])
    }

    pub fn measure_x(&self, label: &QubitLabel) -> Result<Vec<Branch>> {
        self.measure_xy(label, Angle::ZERO)
    }

    pub fn measure_z(&self, label: &QubitLabel) -> Result<Vec<Branch>> {
        self.measure_basis(label, [[C1, C0], [C0, C1]])
    }

    /// Joint projective measurement of a Hermitian Pauli string, `P_r = (I + (−1)^r p)/2`.
    ///
    /// The measured qubits stay in the register.
    pub fn measure_pauli(&self, p: &PauliString) -> Result<Vec<Branch>> {
        if p.is_identity() {
            return Err(DqcError::IdentityMeasurement);
        }
        if p.phase_power() % 2 == 1 {
            return Err(DqcError::Precondition(format!("{p} is not Hermitian")));
        }
        let pp = self.apply_pauli(p)?;
        let mut out = Vec::with_capacity(2);
        for r in 0..2u8 {
            let sign = if r == 0 { 1.0 } else { -1.0 };
            let amps: Vec<Complex64> = self.amps.iter().zip(&pp.amps).map(|(a, b)| (a + b * sign) * 0.5).collect();
            let prob: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            let state = if prob > ZERO_PROB {
                let s = 1.0 / prob.sqrt();
                Some(PureState { labels: self.labels.clone(), amps: amps.into_iter().map(|a| a * s).collect() })
            } else {
                None
            };
            out.push(Branch { outcome: r, probability: prob, state });
        }
        Ok(out)
    }

    /// `⟨ψ|p|ψ⟩`.
    pub fn expectation(&self, p: &PauliString) -> Result<Complex64> {
        let pp = self.apply_pauli(p)?;
        Ok(self.amps.iter().zip(&pp.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Same state with qubits listed in `order` (a permutation of the labels).
    pub fn reorder(&self, order: &[QubitLabel]) -> Result<PureState> {
        if order.len() != self.labels.len() {
            return Err(DqcError::Dimension("reorder needs a permutation".into()));
        }
        check_labels(order)?;
        let n = order.len();
        let src_masks: Vec<usize> = order.iter().map(|l| self.mask(l)).collect::<Result<_>>()?;
        let mut amps = vec![C0; self.amps.len()];
        for (j, a) in amps.iter_mut().enumerate() {
            let mut i = 0usize;
            for (p, m) in src_masks.iter().enumerate() {
                if j >> (n - 1 - p) & 1 == 1 {
                    i |= m;
                }
            }
            *a = self.amps[i];
        }
        Ok(PureState { labels: order.to_vec(), amps })
    }

    /// `⟨self|other⟩` after aligning `other` to this label order.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        let o = other.reorder(&self.labels)?;
        Ok(self.amps.iter().zip(&o.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|⟨a|b⟩|²`.
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// `1 − |⟨a|b⟩|²`; zero iff equal up to global phase.
    pub fn distance(&self, other: &PureState) -> Result<f64> {
        Ok((1.0 - self.fidelity(other)?).max(0.0))
    }

    pub fn to_mixed(&self) -> MixedState {
        let v = nalgebra::DVector::from_vec(self.amps.clone());
        MixedState::new_unchecked(self.labels.clone(), &v * v.adjoint())
    }

    /// Reduced density operator on `keep`, in the order given.
    pub fn reduced(&self, keep: &[QubitLabel]) -> Result<MixedState> {
        check_labels(keep)?;
        let mut order: Vec<QubitLabel> = keep.to_vec();
        for l in &self.labels {
            if !keep.contains(l) {
                order.push(l.clone());
            }
        }
        let s = self.reorder(&order)?;
        let dk = 1usize << keep.len();
        let dr = s.amps.len() / dk;
        let m = DMatrix::from_fn(dk, dr, |a, c| s.amps[a * dr + c]);
        Ok(MixedState::new_unchecked(keep.to_vec(), &m * m.adjoint()))
    }

    /// Rename one qubit.
    pub fn relabel(&mut self, from: &QubitLabel, to: QubitLabel) -> Result<()> {
        let p = self.position(from)?;
        if self.labels.contains(&to) && &to != from {
            return Err(DqcError::DuplicateLabel(to.0));
        }
        self.labels[p] = to;
        Ok(())
    }

    pub(crate) fn from_parts_unchecked(labels: Vec<QubitLabel>, amps: Vec<Complex64>) -> PureState {
        debug_assert_eq!(amps.len(), 1 << labels.len());
        PureState { labels, amps }
    }

    /// [`project_out`](Self::project_out) wrapped as an unnormalised state.
    pub(crate) fn project_unnormalised(&self, label: &QubitLabel, ket: [Complex64; 2]) -> Result<PureState> {
        let amps = self.project_out(label, ket)?;
        Ok(PureState { labels: self.without(label), amps })
    }
}
