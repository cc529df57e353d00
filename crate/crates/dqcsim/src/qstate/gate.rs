use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::angle::Angle;

/// Gates supported by the dense engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    X,
    Y,
    Z,
    H,
    /// Controlled-Z; symmetric in its two targets.
    CZ,
    /// Controlled-X with the first target as control.
    CX,
    /// `diag(1, e^{iθ})`.
    Zrot(Angle),
}

impl Gate {
    pub fn arity(self) -> usize {
        match self {
            Gate::CZ | Gate::CX => 2,
            _ => 1,
        }
    }

    /// Row-major matrix of size `2^arity`, first target most significant.
    pub fn matrix(self) -> Vec<Complex64> {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        match self {
            Gate::X => vec![o, l, l, o],
            Gate::Y => vec![o, -i, i, o],
            Gate::Z => vec![l, o, o, -l],
            Gate::H => vec![h, h, h, -h],
            Gate::Zrot(a) => vec![l, o, o, a.phase()],
            Gate::CZ => {
                let mut m = vec![o; 16];
                m[0] = l;
                m[5] = l;
                m[10] = l;
                m[15] = -l;
                m
            }
            Gate::CX => {
                let mut m = vec![o; 16];
                m[0] = l;
                m[5] = l;
                m[11] = l;
                m[14] = l;
                m
            }
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Zrot(a) => write!(f, "Zrot({a})"),
            g => write!(f, "{g:?}"),
        }
    }
}
