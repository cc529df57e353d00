use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// An angle `k·π/8` with `k` taken modulo 16.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "i64", into = "i64")]
pub struct Angle(u8);

impl Angle {
    pub const ZERO: Angle = Angle(0);
    pub const PI_4: Angle = Angle(2);
    pub const PI_2: Angle = Angle(4);
    pub const PI: Angle = Angle(8);

    pub fn new(k: i64) -> Angle {
        Angle(k.rem_euclid(16) as u8)
    }

    /// `bit·π`.
    pub fn pi_times(bit: u8) -> Angle {
        Angle(8 * (bit & 1))
    }

    pub fn k(self) -> u8 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0 as f64 * std::f64::consts::PI / 8.0
    }

    /// `e^{i·angle}`.
    pub fn phase(self) -> Complex64 {
        Complex64::from_polar(1.0, self.radians())
    }

    /// `(-1)^bit · self`.
    pub fn signed(self, bit: u8) -> Angle {
        if bit & 1 == 1 {
            -self
        } else {
            self
        }
    }

    /// The set `{ℓπ/8 | 0 ≤ ℓ < 8}`.
    pub fn half_circle() -> impl Iterator<Item = Angle> {
        (0..8).map(Angle)
    }

    /// All sixteen angles.
    pub fn all() -> impl Iterator<Item = Angle> {
        (0..16).map(Angle)
    }

    pub fn in_half_circle(self) -> bool {
        self.0 < 8
    }
}

impl From<i64> for Angle {
    fn from(k: i64) -> Angle {
        Angle::new(k)
    }
}

impl From<Angle> for i64 {
    fn from(a: Angle) -> i64 {
        a.0 as i64
    }
}

impl Add for Angle {
    type Output = Angle;
    fn add(self, o: Angle) -> Angle {
        Angle((self.0 + o.0) & 15)
    }
}

impl AddAssign for Angle {
    fn add_assign(&mut self, o: Angle) {
        *self = *self + o;
    }
}

impl Sub for Angle {
    type Output = Angle;
    fn sub(self, o: Angle) -> Angle {
        Angle((self.0 + 16 - o.0) & 15)
    }
}

impl Neg for Angle {
    type Output = Angle;
    fn neg(self) -> Angle {
        Angle((16 - self.0) & 15)
    }
}

impl std::iter::Sum for Angle {
    fn sum<I: Iterator<Item = Angle>>(iter: I) -> Angle {
        iter.fold(Angle::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}π/8", self.0)
    }
}
