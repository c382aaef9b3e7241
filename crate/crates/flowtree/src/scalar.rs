//! Numeric scalars used by the local calculus: exact rationals, binary floats,
//! complex floats, and the quadratic field of numbers `a + b·√q`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::complex::Complex64;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

/// Arithmetic required by the exact and floating evaluation of operators on windows.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    /// Absolute value as a float, used for norms and tolerances.
    fn modulus(&self) -> f64;
    /// Embeds an exact rational.
    fn from_rational(r: &BigRational) -> Self;
    /// Embeds a float; `None` when the scalar type is exact and cannot absorb rounding.
    fn from_f64(x: f64) -> Option<Self>;
    /// Complex conjugate (identity for real types).
    fn conj(&self) -> Self;
    /// Value as a complex float.
    fn to_complex(&self) -> Complex64;
    /// True when arithmetic in this type is exact.
    const EXACT: bool;
}

impl Scalar for BigRational {
    fn modulus(&self) -> f64 {
        self.abs().to_f64().unwrap_or(f64::INFINITY)
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn from_f64(_x: f64) -> Option<Self> {
        None
    }
    fn conj(&self) -> Self {
        self.clone()
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(self.to_f64().unwrap_or(f64::NAN), 0.0)
    }
    const EXACT: bool = true;
}

impl Scalar for f64 {
    fn modulus(&self) -> f64 {
        self.abs()
    }
    fn from_rational(r: &BigRational) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }
    fn from_f64(x: f64) -> Option<Self> {
        Some(x)
    }
    fn conj(&self) -> Self {
        *self
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(*self, 0.0)
    }
    const EXACT: bool = false;
}

impl Scalar for Complex64 {
    fn modulus(&self) -> f64 {
        self.norm()
    }
    fn from_rational(r: &BigRational) -> Self {
        Complex64::new(r.to_f64().unwrap_or(f64::NAN), 0.0)
    }
    fn from_f64(x: f64) -> Option<Self> {
        Some(Complex64::new(x, 0.0))
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn to_complex(&self) -> Complex64 {
        *self
    }
    const EXACT: bool = false;
}

/// Builds the rational `n/d`.
pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Integer power of a rational, allowing negative exponents.
pub fn rational_pow(base: &BigRational, exp: i64) -> BigRational {
    let mut out = BigRational::one();
    let b = if exp < 0 { base.recip() } else { base.clone() };
    for _ in 0..exp.unsigned_abs() {
        out *= &b;
    }
    out
}

/// Parses `"p/q"`, `"p"` or a decimal literal into an exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Ok(n) = t.parse::<BigInt>() {
        return Some(BigRational::from_integer(n));
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.chars().all(|c| c.is_ascii_digit()) && !frac.is_empty() {
            let sign = if int.starts_with('-') { -1 } else { 1 };
            let int_digits = int.trim_start_matches(['-', '+']);
            let whole: BigInt = if int_digits.is_empty() { BigInt::zero() } else { int_digits.parse().ok()? };
            let f: BigInt = frac.parse().ok()?;
            let scale = num::pow(BigInt::from(10), frac.len());
            let value = BigRational::new(whole * &scale + f, scale);
            return Some(if sign < 0 { -value } else { value });
        }
    }
    None
}

/// A number `a + b·√q` with rational `a`, `b`.  `q = 0` marks a plain rational.
#[derive(Clone, PartialEq, Eq)]
pub struct QuadSurd {
    a: BigRational,
    b: BigRational,
    q: u64,
}

fn exact_sqrt(q: u64) -> Option<u64> {
    let r = (q as f64).sqrt().round() as u64;
    (r.checked_mul(r) == Some(q)).then_some(r)
}

impl QuadSurd {
    /// Builds `a + b·√q` in normal form.
    pub fn new(a: BigRational, b: BigRational, q: u64) -> Self {
        let mut out = QuadSurd { a, b, q };
        out.normalize();
        out
    }

    /// The rational `a` viewed as a surd.
    pub fn rational(a: BigRational) -> Self {
        QuadSurd { a, b: BigRational::zero(), q: 0 }
    }

    /// `q^{j/2}` exactly.
    pub fn half_power(q: u64, j: i64) -> Self {
        let qr = BigRational::from_integer(BigInt::from(q));
        if j.rem_euclid(2) == 0 {
            QuadSurd::rational(rational_pow(&qr, j / 2))
        } else {
            let k = (j - 1).div_euclid(2);
            QuadSurd::new(BigRational::zero(), rational_pow(&qr, k), q)
        }
    }

    fn normalize(&mut self) {
        if self.q != 0 {
            if let Some(s) = exact_sqrt(self.q) {
                self.a = &self.a + &self.b * BigRational::from_integer(BigInt::from(s));
                self.b = BigRational::zero();
            }
        }
        if self.b.is_zero() {
            self.q = 0;
        }
    }

    fn common_q(&self, other: &Self) -> u64 {
        match (self.q, other.q) {
            (0, q) | (q, 0) => q,
            (p, q) => {
                assert_eq!(p, q, "surds over different radicands");
                p
            }
        }
    }

    /// Rational part.
    pub fn rational_part(&self) -> &BigRational {
        &self.a
    }

    /// Coefficient of `√q`.
    pub fn surd_part(&self) -> &BigRational {
        &self.b
    }

    /// True when the value is rational.
    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// Float value.
    pub fn to_f64(&self) -> f64 {
        let a = self.a.to_f64().unwrap_or(f64::NAN);
        if self.q == 0 {
            a
        } else {
            a + self.b.to_f64().unwrap_or(f64::NAN) * (self.q as f64).sqrt()
        }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inverse(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let qr = BigRational::from_integer(BigInt::from(self.q));
        let norm = &self.a * &self.a - &self.b * &self.b * qr;
        Some(QuadSurd::new(&self.a / &norm, -(&self.b / &norm), self.q))
    }
}

impl fmt::Debug for QuadSurd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for QuadSurd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.q == 0 {
            write!(f, "{}", self.a)
        } else {
            write!(f, "{} + ({})*sqrt({})", self.a, self.b, self.q)
        }
    }
}

impl Zero for QuadSurd {
    fn zero() -> Self {
        QuadSurd::rational(BigRational::zero())
    }
    fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }
}

impl One for QuadSurd {
    fn one() -> Self {
        QuadSurd::rational(BigRational::one())
    }
}

impl Add for QuadSurd {
    type Output = QuadSurd;
    fn add(self, rhs: Self) -> Self {
        let q = self.common_q(&rhs);
        QuadSurd::new(self.a + rhs.a, self.b + rhs.b, q)
    }
}

impl Sub for QuadSurd {
    type Output = QuadSurd;
    fn sub(self, rhs: Self) -> Self {
        let q = self.common_q(&rhs);
        QuadSurd::new(self.a - rhs.a, self.b - rhs.b, q)
    }
}

impl Mul for QuadSurd {
    type Output = QuadSurd;
    fn mul(self, rhs: Self) -> Self {
        let q = self.common_q(&rhs);
        let qr = BigRational::from_integer(BigInt::from(q));
        let a = &self.a * &rhs.a + &self.b * &rhs.b * qr;
        let b = &self.a * &rhs.b + &self.b * &rhs.a;
        QuadSurd::new(a, b, q)
    }
}

impl Div for QuadSurd {
    type Output = QuadSurd;
    fn div(self, rhs: Self) -> Self {
        self * rhs.inverse().expect("division by zero surd")
    }
}

impl Neg for QuadSurd {
    type Output = QuadSurd;
    fn neg(self) -> Self {
        QuadSurd { a: -self.a, b: -self.b, q: self.q }
    }
}

impl Scalar for QuadSurd {
    fn modulus(&self) -> f64 {
        self.to_f64().abs()
    }
    fn from_rational(r: &BigRational) -> Self {
        QuadSurd::rational(r.clone())
    }
    fn from_f64(_x: f64) -> Option<Self> {
        None
    }
    fn conj(&self) -> Self {
        self.clone()
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(self.to_f64(), 0.0)
    }
    const EXACT: bool = true;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surd_arithmetic_round_trips() {
        let s2 = QuadSurd::half_power(2, 1);
        assert_eq!(s2.clone() * s2.clone(), QuadSurd::rational(ratio(2, 1)));
        let x = QuadSurd::new(ratio(3, 4), ratio(-5, 7), 2);
        let y = x.inverse().unwrap();
        assert_eq!(x * y, QuadSurd::one());
    }

    #[test]
    fn perfect_square_radicand_folds() {
        let s = QuadSurd::half_power(4, 3);
        assert!(s.is_rational());
        assert_eq!(s, QuadSurd::rational(ratio(8, 1)));
        assert_eq!(QuadSurd::half_power(9, -1), QuadSurd::rational(ratio(1, 3)));
    }

    #[test]
    fn half_powers_multiply() {
        for j in -5..6 {
            for k in -5..6 {
                assert_eq!(
                    QuadSurd::half_power(3, j) * QuadSurd::half_power(3, k),
                    QuadSurd::half_power(3, j + k)
                );
            }
        }
    }

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("3/6"), Some(ratio(1, 2)));
        assert_eq!(parse_rational("-0.25"), Some(ratio(-1, 4)));
        assert_eq!(parse_rational("7"), Some(ratio(7, 1)));
        assert_eq!(parse_rational("1/0"), None);
    }
}
