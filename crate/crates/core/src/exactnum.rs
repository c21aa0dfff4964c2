//! Exact scalar arithmetic underpinning every certified computation:
//! Gaussian rationals, dyadic rationals, rigorous square roots, and
//! truncated subtraction.
//!
//! Precision parameters are exponents `k` meaning a tolerance of `2^-k`.
//! Nothing in this module (or anything built on it) touches floating point.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExactError {
    #[error("square root of negative rational {0}")]
    NegativeSqrt(String),
    #[error("invalid rational literal {literal:?}: {reason}")]
    ParseRational { literal: String, reason: String },
    #[error("invalid Gaussian rational literal {literal:?}: {reason}")]
    ParseGaussian { literal: String, reason: String },
}

/// `max(r - s, 0)`.
pub fn truncated_sub(r: &BigRational, s: &BigRational) -> BigRational {
    let d = r - s;
    if d.is_negative() {
        BigRational::zero()
    } else {
        d
    }
}

// ---------------------------------------------------------------------------
// Dyadic rationals
// ---------------------------------------------------------------------------

/// A dyadic rational `mantissa * 2^exponent`, canonical with the mantissa odd
/// or zero. Dyadics carry every `2^-k`-precision answer in the crate, so that
/// comparisons between reported values are exact integer comparisons.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mantissa: BigInt,
    exponent: i64,
}

impl Dyadic {
    pub fn new(mantissa: BigInt, exponent: i64) -> Self {
        let mut d = Dyadic { mantissa, exponent };
        d.normalize();
        d
    }

    fn normalize(&mut self) {
        if self.mantissa.is_zero() {
            self.exponent = 0;
            return;
        }
        let tz = self.mantissa.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.mantissa >>= tz;
            self.exponent += tz as i64;
        }
    }

    pub fn zero() -> Self {
        Dyadic { mantissa: BigInt::zero(), exponent: 0 }
    }

    pub fn one() -> Self {
        Dyadic { mantissa: BigInt::one(), exponent: 0 }
    }

    /// `2^k` for any (possibly negative) `k`.
    pub fn two_pow(k: i64) -> Self {
        Dyadic { mantissa: BigInt::one(), exponent: k }
    }

    pub fn from_integer(n: i64) -> Self {
        Dyadic::new(BigInt::from(n), 0)
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn to_rational(&self) -> BigRational {
        if self.exponent >= 0 {
            BigRational::from_integer(&self.mantissa << self.exponent as u64)
        } else {
            BigRational::new(self.mantissa.clone(), BigInt::one() << (-self.exponent) as u64)
        }
    }

    /// Largest dyadic multiple of `2^-k` that is `<= q`. The error lies in
    /// `[0, 2^-k)`.
    pub fn round_rational_floor(q: &BigRational, k: u32) -> Self {
        let scaled = q * BigRational::from_integer(BigInt::one() << k);
        let floored = scaled.numer().div_floor(scaled.denom());
        Dyadic::new(floored, -(k as i64))
    }

    pub fn neg(&self) -> Self {
        Dyadic { mantissa: -self.mantissa.clone(), exponent: self.exponent }
    }

    pub fn add(&self, other: &Dyadic) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let e = self.exponent.min(other.exponent);
        let a = &self.mantissa << (self.exponent - e) as u64;
        let b = &other.mantissa << (other.exponent - e) as u64;
        Dyadic::new(a + b, e)
    }

    pub fn sub(&self, other: &Dyadic) -> Self {
        self.add(&other.neg())
    }

    /// Exact multiplication by `2^k`.
    pub fn shift(&self, k: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Dyadic { mantissa: self.mantissa.clone(), exponent: self.exponent + k }
    }

    pub fn max(self, other: Dyadic) -> Dyadic {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match (self.mantissa.sign(), other.mantissa.sign()) {
            (Sign::Minus, Sign::NoSign | Sign::Plus) => return Ordering::Less,
            (Sign::NoSign, Sign::Plus) => return Ordering::Less,
            (Sign::Plus, Sign::NoSign | Sign::Minus) => return Ordering::Greater,
            (Sign::NoSign, Sign::Minus) => return Ordering::Greater,
            (Sign::NoSign, Sign::NoSign) => return Ordering::Equal,
            _ => {}
        }
        let e = self.exponent.min(other.exponent);
        let a = &self.mantissa << (self.exponent - e) as u64;
        let b = &other.mantissa << (other.exponent - e) as u64;
        a.cmp(&b)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent >= 0 {
            write!(f, "{}", &self.mantissa << self.exponent as u64)
        } else {
            write!(f, "{}/2^{}", self.mantissa, -self.exponent)
        }
    }
}

/// Dyadic approximation of `sqrt(q)` with `|result - sqrt(q)| < 2^-k` and
/// `result >= 0`. Computed as `floor(sqrt(q) * 2^(k+1)) / 2^(k+1)` using
/// exact integer square roots, so the result never exceeds the true root.
pub fn dyadic_sqrt(q: &BigRational, k: u32) -> Result<Dyadic, ExactError> {
    if q.is_negative() {
        return Err(ExactError::NegativeSqrt(q.to_string()));
    }
    if q.is_zero() {
        return Ok(Dyadic::zero());
    }
    let shift = 2 * (k as u64 + 1);
    let scaled_num = q.numer().magnitude() << shift;
    let t: BigUint = scaled_num / q.denom().magnitude();
    let s = t.sqrt();
    Ok(Dyadic::new(BigInt::from(s), -(k as i64 + 1)))
}

// ---------------------------------------------------------------------------
// Exact comparisons against irrational square roots
// ---------------------------------------------------------------------------

/// Decide `|approx - sqrt(value_sq)| < 2^-k` exactly, given the exact square
/// `value_sq >= 0`.
pub fn dyadic_within_of_sqrt(approx: &Dyadic, value_sq: &BigRational, k: u32) -> bool {
    let a = approx.to_rational();
    let eps = BigRational::new(BigInt::one(), BigInt::one() << k);
    let hi = &a + &eps;
    // sqrt(v) < a + eps
    let upper = hi.is_positive() && *value_sq < &hi * &hi;
    // a - eps < sqrt(v)
    let lo = &a - &eps;
    let lower = lo.is_negative() || &lo * &lo < *value_sq;
    upper && lower
}

/// Decide `sqrt(lhs_sq) <= sqrt(rhs_sq) + eps` exactly, for exact nonnegative
/// `lhs_sq`, `rhs_sq` and `eps >= 0`.
pub fn sqrt_leq_sqrt_plus(lhs_sq: &BigRational, rhs_sq: &BigRational, eps: &BigRational) -> bool {
    // sqrt(L) <= sqrt(R) + e  <=>  L - R - e^2 <= 2 e sqrt(R)
    let gap = lhs_sq - rhs_sq - eps * eps;
    if !gap.is_positive() {
        return true;
    }
    let lhs = &gap * &gap;
    let rhs = BigRational::from_integer(BigInt::from(4)) * eps * eps * rhs_sq;
    lhs <= rhs
}

/// Decide `sqrt(value_sq) < bound` exactly.
pub fn sqrt_lt(value_sq: &BigRational, bound: &BigRational) -> bool {
    bound.is_positive() && *value_sq < bound * bound
}

// ---------------------------------------------------------------------------
// Gaussian rationals
// ---------------------------------------------------------------------------

/// An element of `Q(i)`: `re + im*i` with both parts exact rationals held in
/// lowest terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GaussianRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussianRational {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        GaussianRational { re, im }
    }

    pub fn from_rational(re: BigRational) -> Self {
        GaussianRational { re, im: BigRational::zero() }
    }

    pub fn from_integer(n: i64) -> Self {
        Self::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn zero() -> Self {
        Self::from_integer(0)
    }

    pub fn one() -> Self {
        Self::from_integer(1)
    }

    pub fn i() -> Self {
        GaussianRational { re: BigRational::zero(), im: BigRational::one() }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        GaussianRational { re: self.re.clone(), im: -self.im.clone() }
    }

    pub fn neg(&self) -> Self {
        GaussianRational { re: -self.re.clone(), im: -self.im.clone() }
    }

    pub fn add(&self, other: &Self) -> Self {
        GaussianRational { re: &self.re + &other.re, im: &self.im + &other.im }
    }

    pub fn sub(&self, other: &Self) -> Self {
        GaussianRational { re: &self.re - &other.re, im: &self.im - &other.im }
    }

    pub fn mul(&self, other: &Self) -> Self {
        GaussianRational {
            re: &self.re * &other.re - &self.im * &other.im,
            im: &self.re * &other.im + &self.im * &other.re,
        }
    }

    /// Exact division; `None` when `other` is zero.
    pub fn div(&self, other: &Self) -> Option<Self> {
        let n = other.modulus_sq();
        if n.is_zero() {
            return None;
        }
        let p = self.mul(&other.conj());
        Some(GaussianRational { re: p.re / &n, im: p.im / &n })
    }

    /// `|z|^2 = re^2 + im^2`, always an exact rational.
    pub fn modulus_sq(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            return write!(f, "{}", format_rational(&self.re));
        }
        if self.re.is_zero() {
            return write!(f, "{}*i", format_rational(&self.im));
        }
        if self.im.is_negative() {
            write!(f, "{}-{}*i", format_rational(&self.re), format_rational(&(-self.im.clone())))
        } else {
            write!(f, "{}+{}*i", format_rational(&self.re), format_rational(&self.im))
        }
    }
}

pub fn format_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parse `p`, `p/q` (optional sign, arbitrary precision).
pub fn parse_rational(s: &str) -> Result<BigRational, ExactError> {
    let t = s.trim();
    let err = |reason: &str| ExactError::ParseRational {
        literal: s.to_string(),
        reason: reason.to_string(),
    };
    if t.is_empty() {
        return Err(err("empty"));
    }
    let (num_str, den_str) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim())),
        None => (t, None),
    };
    let num = BigInt::from_str(num_str).map_err(|_| err("bad numerator"))?;
    let den = match den_str {
        Some(d) => BigInt::from_str(d).map_err(|_| err("bad denominator"))?,
        None => BigInt::one(),
    };
    if den.is_zero() {
        return Err(err("zero denominator"));
    }
    Ok(BigRational::new(num, den))
}

/// Parse a Gaussian rational: `p/q`, `p/q+r/s*i`, `p/q-r/s*i`, `r/s*i`, `i`,
/// `-i`.
pub fn parse_gaussian(s: &str) -> Result<GaussianRational, ExactError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let err = |reason: &str| ExactError::ParseGaussian {
        literal: s.to_string(),
        reason: reason.to_string(),
    };
    if t.is_empty() {
        return Err(err("empty"));
    }
    if !t.ends_with('i') {
        return Ok(GaussianRational::from_rational(parse_rational(&t)?));
    }
    let body = &t[..t.len() - 1];
    // Split the imaginary coefficient off at the last top-level +/- that is
    // not a leading sign.
    let split_at = body
        .char_indices()
        .skip(1)
        .filter(|(_, c)| *c == '+' || *c == '-')
        .map(|(idx, _)| idx)
        .last();
    let (re_str, im_str) = match split_at {
        Some(idx) => (&body[..idx], &body[idx..]),
        None => ("", body),
    };
    let im_str = im_str.strip_suffix('*').unwrap_or(im_str);
    let im = match im_str {
        "" | "+" => BigRational::one(),
        "-" => -BigRational::one(),
        lit => {
            let lit = lit.strip_prefix('+').unwrap_or(lit);
            parse_rational(lit)?
        }
    };
    let re = if re_str.is_empty() { BigRational::zero() } else { parse_rational(re_str)? };
    if split_at.is_some() && re_str.is_empty() {
        return Err(err("missing real part"));
    }
    Ok(GaussianRational::new(re, im))
}
