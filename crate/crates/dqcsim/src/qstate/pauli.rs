use std::collections::BTreeMap;
use std::fmt;
use std::ops::Mul;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::label::QubitLabel;
use crate::error::{DqcError, Result};

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    pub const NONTRIVIAL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    /// `a·b = i^k · c`, returned as `(k, c)`.
    pub fn product(a: Pauli, b: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (a, b) {
            (I, p) | (p, I) => (0, p),
            (X, X) | (Y, Y) | (Z, Z) => (0, I),
            (X, Y) => (1, Z),
            (Y, X) => (3, Z),
            (Y, Z) => (1, X),
            (Z, Y) => (3, X),
            (Z, X) => (1, Y),
            (X, Z) => (3, Y),
        }
    }

    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Whether the letter has an X component (X or Y).
    pub fn has_x(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    /// Whether the letter has a Z component (Z or Y).
    pub fn has_z(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    pub fn commutes(self, other: Pauli) -> bool {
        self == Pauli::I || other == Pauli::I || self == other
    }
}

/// Signed Pauli word `i^phase · ⊗ letters` over labelled qubits.
///
/// Identity letters are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct PauliString {
    phase: u8,
    letters: BTreeMap<QubitLabel, Pauli>,
}

impl PauliString {
    pub fn identity() -> PauliString {
        PauliString::default()
    }

    pub fn single(label: impl Into<QubitLabel>, p: Pauli) -> PauliString {
        let mut s = PauliString::identity();
        s.set(label.into(), p);
        s
    }

    pub fn from_letters<I, L>(letters: I) -> PauliString
    where
        I: IntoIterator<Item = (L, Pauli)>,
        L: Into<QubitLabel>,
    {
        let mut s = PauliString::identity();
        for (l, p) in letters {
            s = s * PauliString::single(l, p);
        }
        s
    }

    /// Parse a compact word such as `"XZI"` against an ordered label list.
    pub fn parse(word: &str, labels: &[QubitLabel]) -> Result<PauliString> {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() != labels.len() {
            return Err(DqcError::Dimension(format!(
                "word `{word}` has {} letters for {} labels",
                chars.len(),
                labels.len()
            )));
        }
        let mut s = PauliString::identity();
        for (c, l) in chars.into_iter().zip(labels) {
            let p = Pauli::from_char(c).ok_or_else(|| DqcError::Config(format!("bad Pauli letter `{c}`")))?;
            s.set(l.clone(), p);
        }
        Ok(s)
    }

    /// Phase as a power of `i`.
    pub fn phase_power(&self) -> u8 {
        self.phase
    }

    pub fn phase(&self) -> Complex64 {
        match self.phase & 3 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    pub fn with_phase(mut self, power: u8) -> PauliString {
        self.phase = power & 3;
        self
    }

    pub fn set(&mut self, label: QubitLabel, p: Pauli) {
        if p == Pauli::I {
            self.letters.remove(&label);
        } else {
            self.letters.insert(label, p);
        }
    }

    pub fn get(&self, label: &QubitLabel) -> Pauli {
        self.letters.get(label).copied().unwrap_or(Pauli::I)
    }

    pub fn letters(&self) -> &BTreeMap<QubitLabel, Pauli> {
        &self.letters
    }

    pub fn support(&self) -> impl Iterator<Item = &QubitLabel> {
        self.letters.keys()
    }

    pub fn weight(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn count(&self, p: Pauli) -> usize {
        self.letters.values().filter(|&&q| q == p).count()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = self.letters.iter().filter(|(l, p)| !p.commutes(other.get(l))).count();
        anti % 2 == 0
    }

    /// Drop the letters outside `keep` (phase retained).
    pub fn restricted<'a>(&self, keep: impl Fn(&QubitLabel) -> bool + 'a) -> PauliString {
        PauliString {
            phase: self.phase,
            letters: self.letters.iter().filter(|(l, _)| keep(l)).map(|(l, p)| (l.clone(), *p)).collect(),
        }
    }

    /// Dense matrix over `order` (first label = most significant bit).
    pub fn matrix(&self, order: &[QubitLabel]) -> Result<DMatrix<Complex64>> {
        for l in self.letters.keys() {
            if !order.contains(l) {
                return Err(DqcError::UnknownLabel(l.0.clone()));
            }
        }
        let mut m = DMatrix::from_element(1, 1, self.phase());
        for l in order {
            let p = self.get(l).matrix();
            let pm = DMatrix::from_fn(2, 2, |r, c| p[r][c]);
            m = m.kronecker(&pm);
        }
        Ok(m)
    }

    /// Text form such as `+X(a)Z(b)`; identity is `+I`.
    pub fn to_text(&self) -> String {
        let sign = ["+", "+i", "-", "-i"][self.phase as usize & 3];
        if self.letters.is_empty() {
            return format!("{sign}I");
        }
        let body: String = self.letters.iter().map(|(l, p)| format!("{}({})", p.as_char(), l)).collect();
        format!("{sign}{body}")
    }
}

impl Mul for PauliString {
    type Output = PauliString;
    fn mul(self, rhs: PauliString) -> PauliString {
        &self * &rhs
    }
}

impl<'a> Mul<&'a PauliString> for &'a PauliString {
    type Output = PauliString;
    fn mul(self, rhs: &'a PauliString) -> PauliString {
        let mut phase = (self.phase + rhs.phase) & 3;
        let mut letters = self.letters.clone();
        for (l, &q) in &rhs.letters {
            let p = letters.get(l).copied().unwrap_or(Pauli::I);
            let (k, r) = Pauli::product(p, q);
            phase = (phase + k) & 3;
            if r == Pauli::I {
                letters.remove(l);
            } else {
                letters.insert(l.clone(), r);
            }
        }
        PauliString { phase, letters }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
