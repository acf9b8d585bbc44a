use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use num_integer::Integer;
use serde::{Deserialize, Serialize};

/// Exact rational `num / den` with `den >= 1`, kept unreduced.
///
/// Equality and ordering use 128-bit cross-multiplication, so `2/4 == 1/2`.
#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(into = "(i64, i64)", try_from = "(i64, i64)")]
pub struct Fraction {
    num: i64,
    den: i64,
}

impl Fraction {
    /// # Panics
    /// If `den < 1`.
    pub fn new(num: i64, den: i64) -> Self {
        Self::checked(num, den).expect("fraction denominator must be >= 1")
    }

    pub fn checked(num: i64, den: i64) -> Option<Self> {
        (den >= 1).then_some(Fraction { num, den })
    }

    pub fn integer(value: i64) -> Self {
        Fraction { num: value, den: 1 }
    }

    pub fn numer(self) -> i64 {
        self.num
    }

    pub fn denom(self) -> i64 {
        self.den
    }

    /// Lowest terms; only used for display and hashing.
    pub fn reduced(self) -> Self {
        let g = self.num.gcd(&self.den).max(1);
        Fraction {
            num: self.num / g,
            den: self.den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Same representation, not just the same value.
    pub fn identical(self, other: Self) -> bool {
        self.num == other.num && self.den == other.den
    }
}

impl PartialEq for Fraction {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Fraction {}

impl Ord for Fraction {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = i128::from(self.num) * i128::from(other.den);
        let rhs = i128::from(other.num) * i128::from(self.den);
        lhs.cmp(&rhs)
    }
}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Hash for Fraction {
    fn hash<H: Hasher>(&self, state: &mut H) {
        let r = self.reduced();
        r.num.hash(state);
        r.den.hash(state);
    }
}

impl fmt::Debug for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl From<Fraction> for (i64, i64) {
    fn from(f: Fraction) -> Self {
        (f.num, f.den)
    }
}

impl TryFrom<(i64, i64)> for Fraction {
    type Error = String;

    fn try_from((num, den): (i64, i64)) -> Result<Self, Self::Error> {
        Fraction::checked(num, den).ok_or_else(|| format!("invalid denominator {den}"))
    }
}
