use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::gate::Gate;
use super::label::QubitLabel;
use super::pauli::PauliString;
use super::pure::PureState;
use super::{check_labels, NORM_TOL};
use crate::error::{DqcError, Result};

/// Density operator over an ordered list of labelled qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    labels: Vec<QubitLabel>,
    rho: DMatrix<Complex64>,
}

impl MixedState {
    /// Validating constructor: Hermitian, unit trace, positive semidefinite.
    pub fn from_matrix(labels: Vec<QubitLabel>, rho: DMatrix<Complex64>) -> Result<MixedState> {
        check_labels(&labels)?;
        let d = 1usize << labels.len();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(DqcError::Dimension(format!(
                "{}x{} operator for {} qubits",
                rho.nrows(),
                rho.ncols(),
                labels.len()
            )));
        }
        let s = MixedState { labels, rho };
        s.validate()?;
        Ok(s)
    }

    pub(crate) fn new_unchecked(labels: Vec<QubitLabel>, rho: DMatrix<Complex64>) -> MixedState {
        MixedState { labels, rho }
    }

    pub fn maximally_mixed(labels: Vec<QubitLabel>) -> Result<MixedState> {
        check_labels(&labels)?;
        let d = 1usize << labels.len();
        let rho = DMatrix::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0);
        Ok(MixedState { labels, rho })
    }

    /// Convex combination `Σ w_i |ψ_i⟩⟨ψ_i|` of states over the same labels.
    pub fn mixture(items: &[(f64, PureState)]) -> Result<MixedState> {
        let first = items.first().ok_or_else(|| DqcError::Dimension("empty mixture".into()))?;
        let labels = first.1.labels().to_vec();
        let d = 1usize << labels.len();
        let mut rho = DMatrix::zeros(d, d);
        for (w, s) in items {
            let s = s.reorder(&labels)?;
            let v = nalgebra::DVector::from_vec(s.amplitudes().to_vec());
            rho += (&v * v.adjoint()) * Complex64::new(*w, 0.0);
        }
        MixedState::from_matrix(labels, rho)
    }

    pub fn labels(&self) -> &[QubitLabel] {
        &self.labels
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// Check the density-operator invariants.
    pub fn validate(&self) -> Result<()> {
        let herm = (&self.rho - self.rho.adjoint()).camax();
        if herm > NORM_TOL {
            return Err(DqcError::Precondition(format!("not Hermitian ({herm:e})")));
        }
        let tr = self.rho.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(DqcError::NotNormalised(tr.re));
        }
        let min = hermitian_eigenvalues(&self.rho).into_iter().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(DqcError::Precondition(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn tensor(&self, other: &MixedState) -> Result<MixedState> {
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        check_labels(&labels)?;
        Ok(MixedState { labels, rho: self.rho.kronecker(&other.rho) })
    }

    pub fn tensor_all<'a, I: IntoIterator<Item = &'a MixedState>>(states: I) -> Result<MixedState> {
        let scalar = MixedState { labels: Vec::new(), rho: DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)) };
        states.into_iter().try_fold(scalar, |acc, s| acc.tensor(s))
    }

    /// Dense operator of `m` acting on `targets`, identity elsewhere.
    fn embed(&self, m: &[Complex64], targets: &[QubitLabel]) -> Result<DMatrix<Complex64>> {
        let d = 1usize << self.labels.len();
        let mut cols = Vec::with_capacity(d);
        for j in 0..d {
            let mut e = vec![Complex64::new(0.0, 0.0); d];
            e[j] = Complex64::new(1.0, 0.0);
            let mut s = PureState::from_parts_unchecked(self.labels.clone(), e);
            s.apply_matrix_mut(m, targets)?;
            cols.push(s.amplitudes().to_vec());
        }
        Ok(DMatrix::from_fn(d, d, |r, c| cols[c][r]))
    }

    pub fn apply_gate(&self, gate: Gate, targets: &[QubitLabel]) -> Result<MixedState> {
        if targets.len() != gate.arity() {
            return Err(DqcError::Arity { gate: gate.to_string(), expected: gate.arity(), got: targets.len() });
        }
        let u = self.embed(&gate.matrix(), targets)?;
        Ok(MixedState { labels: self.labels.clone(), rho: &u * &self.rho * u.adjoint() })
    }

    pub fn apply_pauli(&self, p: &PauliString) -> Result<MixedState> {
        let u = p.matrix(&self.labels)?;
        Ok(MixedState { labels: self.labels.clone(), rho: &u * &self.rho * u.adjoint() })
    }

    /// Same operator with qubits listed in `order`.
    pub fn reorder(&self, order: &[QubitLabel]) -> Result<MixedState> {
        if order.len() != self.labels.len() {
            return Err(DqcError::Dimension("reorder needs a permutation".into()));
        }
        check_labels(order)?;
        let n = order.len();
        let pos: Vec<usize> = order
            .iter()
            .map(|l| self.labels.iter().position(|x| x == l).ok_or_else(|| DqcError::UnknownLabel(l.0.clone())))
            .collect::<Result<_>>()?;
        let map = |j: usize| {
            let mut i = 0usize;
            for (p, &src) in pos.iter().enumerate() {
                if j >> (n - 1 - p) & 1 == 1 {
                    i |= 1 << (n - 1 - src);
                }
            }
            i
        };
        let d = 1usize << n;
        let idx: Vec<usize> = (0..d).map(map).collect();
        Ok(MixedState { labels: order.to_vec(), rho: DMatrix::from_fn(d, d, |r, c| self.rho[(idx[r], idx[c])]) })
    }

    pub fn partial_trace(&self, discard: &[QubitLabel]) -> Result<MixedState> {
        for l in discard {
            if !self.labels.contains(l) {
                return Err(DqcError::UnknownLabel(l.0.clone()));
            }
        }
        let keep: Vec<QubitLabel> = self.labels.iter().filter(|l| !discard.contains(l)).cloned().collect();
        let mut order = keep.clone();
        order.extend(self.labels.iter().filter(|l| discard.contains(l)).cloned());
        let r = self.reorder(&order)?;
        let dk = 1usize << keep.len();
        let dd = r.rho.nrows() / dk;
        let rho = DMatrix::from_fn(dk, dk, |a, b| (0..dd).map(|c| r.rho[(a * dd + c, b * dd + c)]).sum());
        Ok(MixedState { labels: keep, rho })
    }

    /// `½‖a − b‖₁`, aligning `other` to this label order.
    pub fn trace_distance(&self, other: &MixedState) -> Result<f64> {
        let o = other.reorder(&self.labels)?;
        Ok(0.5 * trace_norm(&(&self.rho - &o.rho)))
    }

    /// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
    pub fn fidelity(&self, other: &MixedState) -> Result<f64> {
        let o = other.reorder(&self.labels)?;
        let sq = psd_sqrt(&self.rho);
        let m = &sq * &o.rho * &sq;
        let s: f64 = hermitian_eigenvalues(&m).into_iter().map(|x| x.max(0.0).sqrt()).sum();
        Ok((s * s).min(1.0))
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn overlap(&self, psi: &PureState) -> Result<f64> {
        let p = psi.reorder(&self.labels)?;
        let v = nalgebra::DVector::from_vec(p.amplitudes().to_vec());
        Ok((v.adjoint() * &self.rho * &v)[(0, 0)].re)
    }
}

pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.iter().copied().collect()
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm(m: &DMatrix<Complex64>) -> f64 {
    hermitian_eigenvalues(m).into_iter().map(f64::abs).sum()
}

fn psd_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let e = SymmetricEigen::new(h);
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|x| Complex64::new(x.max(0.0).sqrt(), 0.0)));
    &e.eigenvectors * d * e.eigenvectors.adjoint()
}

/// Trace distance for either representation.
pub fn state_distance(a: &MixedState, b: &MixedState) -> Result<f64> {
    if a.num_qubits() != b.num_qubits() {
        return Err(DqcError::Dimension("state_distance on different sizes".into()));
    }
    a.trace_distance(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::label::labels;
    use crate::qstate::Pauli;

    #[test]
    fn distance_examples() {
        let z0 = PureState::z_basis("a", 0).to_mixed();
        let z1 = PureState::z_basis("a", 1).to_mixed();
        assert!(z0.trace_distance(&z0).unwrap() < 1e-15);
        assert!((z0.trace_distance(&z1).unwrap() - 1.0).abs() < 1e-12);
        let mm = MixedState::maximally_mixed(labels(["a"])).unwrap();
        assert!((state_distance(&mm, &z0).unwrap() - 0.5).abs() < 1e-12);
        assert!((mm.fidelity(&z0).unwrap() - 0.5).abs() < 1e-12);
        assert!((z0.fidelity(&z0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_of_product() {
        let a = PureState::plus_angle("a", crate::qstate::Angle::new(3));
        let b = PureState::z_basis("b", 1);
        let ab = a.tensor(&b).unwrap().to_mixed();
        let ra = ab.partial_trace(&labels(["b"])).unwrap();
        assert!(ra.trace_distance(&a.to_mixed()).unwrap() < 1e-12);
        assert!((ra.trace().re - 1.0).abs() < 1e-12);
        ra.validate().unwrap();
    }

    #[test]
    fn tensor_keeps_unit_trace() {
        let mm = MixedState::maximally_mixed(labels(["a"])).unwrap();
        let z = PureState::z_basis("b", 0).to_mixed();
        let t = mm.tensor(&z).unwrap();
        assert!((t.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pauli_conjugation_and_reorder() {
        let s = PureState::z_basis("a", 0).tensor(&PureState::plus("b")).unwrap().to_mixed();
        let p = PauliString::single("a", Pauli::X);
        let t = s.apply_pauli(&p).unwrap();
        let want = PureState::z_basis("a", 1).tensor(&PureState::plus("b")).unwrap();
        assert!((t.overlap(&want).unwrap() - 1.0).abs() < 1e-12);
        let r = t.reorder(&labels(["b", "a"])).unwrap();
        assert!(r.trace_distance(&t).unwrap() < 1e-12);
    }

    #[test]
    fn rejects_invalid_operators() {
        let bad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.5, 0.0),
            Complex64::new(-0.5, 0.0),
        ]));
        assert!(MixedState::from_matrix(labels(["a"]), bad).is_err());
    }
}
