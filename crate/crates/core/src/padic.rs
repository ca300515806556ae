//! Fixed-precision arithmetic in Q_p.
//!
//! A nonzero [`PadicNumber`] is `p^v * u` where `u` is a unit known modulo
//! `p^N`, `N` being the number's (relative) precision. Results are truncated,
//! never rounded. Subtracting close numbers lowers the precision of the
//! result by the number of cancelled digits, so every value carries the count
//! of digits that are actually guaranteed.
//!
//! Zero is a distinguished value (infinite valuation). A sum whose guaranteed
//! digits all cancel is reported as zero; inverting it is a
//! [`PadicError::DivisionByZero`].

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::rational::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PadicError {
    #[error("prime mismatch: {0} vs {1}")]
    PrimeMismatch(u64, u64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("precision must be positive")]
    ZeroPrecision,
    #[error("cannot parse p-adic number: {0}")]
    Parse(String),
}

pub fn is_prime(p: u64) -> bool {
    primal::is_prime(p)
}

fn check_prime(p: u64) -> Result<(), PadicError> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(PadicError::NotPrime(p))
    }
}

/// Number of significant p-adic digits carried by fresh values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionContext {
    digits: usize,
}

impl PrecisionContext {
    pub const DEFAULT_DIGITS: usize = 32;

    pub fn new(digits: usize) -> Result<Self, PadicError> {
        if digits == 0 {
            return Err(PadicError::ZeroPrecision);
        }
        Ok(Self { digits })
    }

    pub fn digits(&self) -> usize {
        self.digits
    }
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self {
            digits: Self::DEFAULT_DIGITS,
        }
    }
}

/// Subgroups of Q_p* (and the ring Z_p) used by membership tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedSubgroup {
    /// Z_p
    Integers,
    /// Z_p*
    Units,
    /// 1 + p^k Z_p, k >= 1
    OnePlus(u32),
}

#[derive(Clone, Debug)]
pub struct PadicNumber {
    prime: u64,
    /// `None` encodes zero.
    valuation: Option<i64>,
    /// Unit part, reduced modulo p^precision; coprime to p when nonzero.
    unit: BigUint,
    precision: usize,
}

impl PadicNumber {
    pub fn zero(prime: u64, ctx: PrecisionContext) -> Self {
        Self {
            prime,
            valuation: None,
            unit: BigUint::zero(),
            precision: ctx.digits,
        }
    }

    pub fn one(prime: u64, ctx: PrecisionContext) -> Self {
        Self {
            prime,
            valuation: Some(0),
            unit: BigUint::one(),
            precision: ctx.digits,
        }
    }

    /// Canonical embedding of `numerator / denominator` into Q_p.
    pub fn from_rational(
        numerator: &BigInt,
        denominator: &BigInt,
        prime: u64,
        ctx: PrecisionContext,
    ) -> Result<Self, PadicError> {
        check_prime(prime)?;
        if denominator.is_zero() {
            return Err(PadicError::ZeroDenominator);
        }
        if numerator.is_zero() {
            return Ok(Self::zero(prime, ctx));
        }
        let (n, vn) = rational::strip_prime(numerator, prime);
        let (d, vd) = rational::strip_prime(denominator, prime);
        let modulus = BigInt::from(prime).pow(ctx.digits as u32);
        // d is coprime to p, hence invertible modulo p^N
        let d_inv = rational::mod_inverse(&d, &modulus).expect("unit denominator");
        let unit = (n * d_inv).mod_floor(&modulus);
        Ok(Self {
            prime,
            valuation: Some(vn - vd),
            unit: rational::to_biguint(&unit),
            precision: ctx.digits,
        })
    }

    pub fn from_i64(n: i64, prime: u64, ctx: PrecisionContext) -> Result<Self, PadicError> {
        Self::from_rational(&BigInt::from(n), &BigInt::one(), prime, ctx)
    }

    pub fn from_ratio(x: &Rational, prime: u64, ctx: PrecisionContext) -> Result<Self, PadicError> {
        Self::from_rational(x.numer(), x.denom(), prime, ctx)
    }

    /// Builds a number from its valuation and low-order-first digits.
    pub fn from_digits(prime: u64, valuation: i64, digits: &[u64]) -> Result<Self, PadicError> {
        check_prime(prime)?;
        if digits.is_empty() {
            return Err(PadicError::ZeroPrecision);
        }
        if digits[0] == 0 {
            return Err(PadicError::Parse("leading unit digit must be nonzero".into()));
        }
        let mut unit = BigUint::zero();
        for &d in digits.iter().rev() {
            if d >= prime {
                return Err(PadicError::Parse(format!("digit {d} out of range for p={prime}")));
            }
            unit = unit * prime + d;
        }
        Ok(Self {
            prime,
            valuation: Some(valuation),
            unit,
            precision: digits.len(),
        })
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn valuation(&self) -> Option<i64> {
        self.valuation
    }

    pub fn precision(&self) -> usize {
        self.precision
    }

    pub fn is_zero(&self) -> bool {
        self.valuation.is_none()
    }

    /// Unit digits, low order first; exactly `precision` of them.
    pub fn digits(&self) -> Vec<u64> {
        if self.is_zero() {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(self.precision);
        let mut u = self.unit.clone();
        let p = BigUint::from(self.prime);
        for _ in 0..self.precision {
            let (q, r) = u.div_rem(&p);
            out.push(r.to_u64().unwrap());
            u = q;
        }
        out
    }

    /// |x|_p = p^(-v), |0|_p = 0.
    pub fn norm(&self) -> Rational {
        match self.valuation {
            None => BigRational::zero(),
            Some(v) => rational::prime_pow(self.prime, -v),
        }
    }

    /// The rational `u * p^v` represented by the stored digits.
    pub fn to_rational(&self) -> Rational {
        match self.valuation {
            None => BigRational::zero(),
            Some(v) => {
                BigRational::from_integer(BigInt::from(self.unit.clone())) * rational::prime_pow(self.prime, v)
            }
        }
    }

    /// Absolute precision: the value is known modulo p^(v + N).
    fn absolute_precision(&self) -> Option<i64> {
        self.valuation.map(|v| v + self.precision as i64)
    }

    pub fn with_precision(&self, precision: usize) -> Self {
        if self.is_zero() || precision >= self.precision {
            return self.clone();
        }
        let m = rational::biguint_pow(self.prime, precision as u32);
        Self {
            unit: &self.unit % m,
            precision,
            ..self.clone()
        }
    }

    fn same_prime(&self, other: &Self) -> Result<(), PadicError> {
        if self.prime != other.prime {
            Err(PadicError::PrimeMismatch(self.prime, other.prime))
        } else {
            Ok(())
        }
    }

    /// Builds a result from a signed integer `s` known modulo p^width, sitting at
    /// valuation `base`.
    fn normalize(prime: u64, base: i64, s: BigInt, width: usize, fallback_precision: usize) -> Self {
        let modulus = BigInt::from(prime).pow(width as u32);
        let s = s.mod_floor(&modulus);
        if s.is_zero() {
            return Self {
                prime,
                valuation: None,
                unit: BigUint::zero(),
                precision: fallback_precision,
            };
        }
        let (u, t) = rational::strip_prime(&s, prime);
        Self {
            prime,
            valuation: Some(base + t),
            unit: rational::to_biguint(&u),
            precision: width - t as usize,
        }
    }

    fn add_signed(&self, other: &Self, negate: bool) -> Result<Self, PadicError> {
        self.same_prime(other)?;
        match (self.valuation, other.valuation) {
            (None, None) => return Ok(self.clone()),
            (None, Some(_)) => return Ok(if negate { other.neg() } else { other.clone() }),
            (Some(_), None) => return Ok(self.clone()),
            _ => {}
        }
        let vx = self.valuation.unwrap();
        let vy = other.valuation.unwrap();
        let base = vx.min(vy);
        let abs = self.absolute_precision().unwrap().min(other.absolute_precision().unwrap());
        let width = (abs - base) as usize;
        let p = BigInt::from(self.prime);
        let x = BigInt::from(self.unit.clone()) * p.pow((vx - base) as u32);
        let y = BigInt::from(other.unit.clone()) * p.pow((vy - base) as u32);
        let s = if negate { x - y } else { x + y };
        Ok(Self::normalize(
            self.prime,
            base,
            s,
            width,
            self.precision.min(other.precision),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self, PadicError> {
        self.add_signed(other, false)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, PadicError> {
        self.add_signed(other, true)
    }

    pub fn neg(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let m = rational::biguint_pow(self.prime, self.precision as u32);
        Self {
            unit: m - &self.unit,
            ..self.clone()
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self, PadicError> {
        self.same_prime(other)?;
        let (vx, vy) = match (self.valuation, other.valuation) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Ok(Self {
                    prime: self.prime,
                    valuation: None,
                    unit: BigUint::zero(),
                    precision: self.precision.min(other.precision),
                })
            }
        };
        let precision = self.precision.min(other.precision);
        let m = rational::biguint_pow(self.prime, precision as u32);
        Ok(Self {
            prime: self.prime,
            valuation: Some(vx + vy),
            unit: (&self.unit * &other.unit) % m,
            precision,
        })
    }

    pub fn inv(&self) -> Result<Self, PadicError> {
        let v = self.valuation.ok_or(PadicError::DivisionByZero)?;
        let m = BigInt::from(self.prime).pow(self.precision as u32);
        let u_inv = rational::mod_inverse(&BigInt::from(self.unit.clone()), &m)
            .expect("unit part is coprime to p");
        Ok(Self {
            prime: self.prime,
            valuation: Some(-v),
            unit: rational::to_biguint(&u_inv),
            precision: self.precision,
        })
    }

    pub fn div(&self, other: &Self) -> Result<Self, PadicError> {
        self.mul(&other.inv()?)
    }

    pub fn member(&self, group: NamedSubgroup) -> bool {
        match group {
            NamedSubgroup::Integers => self.valuation.map_or(true, |v| v >= 0),
            NamedSubgroup::Units => self.valuation == Some(0),
            NamedSubgroup::OnePlus(k) => {
                if self.valuation != Some(0) {
                    return false;
                }
                let one = Self {
                    prime: self.prime,
                    valuation: Some(0),
                    unit: BigUint::one(),
                    precision: self.precision,
                };
                let d = self.sub(&one).expect("same prime");
                d.valuation.map_or(true, |v| v >= k as i64)
            }
        }
    }
}

impl PartialEq for PadicNumber {
    /// Equal when primes, valuations and the digits up to the smaller
    /// precision agree.
    fn eq(&self, other: &Self) -> bool {
        if self.prime != other.prime || self.valuation != other.valuation {
            return false;
        }
        if self.is_zero() {
            return true;
        }
        let n = self.precision.min(other.precision);
        let m = rational::biguint_pow(self.prime, n as u32);
        &self.unit % &m == &other.unit % &m
    }
}

impl fmt::Display for PadicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.valuation {
            None => write!(f, "p={} v=inf digits=", self.prime),
            Some(v) => {
                let digits: Vec<String> = self.digits().iter().map(|d| d.to_string()).collect();
                write!(f, "p={} v={} digits={}", self.prime, v, digits.join(","))
            }
        }
    }
}

impl FromStr for PadicNumber {
    type Err = PadicError;

    /// Parses `p=<prime> v=<valuation> digits=<d0,d1,...>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PadicError::Parse(s.to_string());
        let mut prime = None;
        let mut val = None;
        let mut digits = None;
        for field in s.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(bad)?;
            match key {
                "p" => prime = Some(value.parse::<u64>().map_err(|_| bad())?),
                "v" => val = Some(value.to_string()),
                "digits" => digits = Some(value.to_string()),
                _ => return Err(bad()),
            }
        }
        let prime = prime.ok_or_else(bad)?;
        let val = val.ok_or_else(bad)?;
        let digits = digits.ok_or_else(bad)?;
        check_prime(prime)?;
        if val == "inf" {
            if !digits.is_empty() {
                return Err(bad());
            }
            return Ok(Self::zero(prime, PrecisionContext::default()));
        }
        let v: i64 = val.parse().map_err(|_| bad())?;
        let ds: Vec<u64> = digits
            .split(',')
            .map(|d| d.parse::<u64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        Self::from_digits(prime, v, &ds)
    }
}

/// Orders by absolute value (larger norm first is `Greater`), zero smallest.
pub fn cmp_norm(a: &PadicNumber, b: &PadicNumber) -> Ordering {
    match (a.valuation, b.valuation) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => y.cmp(&x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    fn q(n: i64, d: i64, p: u64) -> PadicNumber {
        PadicNumber::from_rational(&BigInt::from(n), &BigInt::from(d), p, ctx()).unwrap()
    }

    #[test]
    fn one_has_single_leading_digit() {
        let x = q(1, 1, 5);
        assert_eq!(x.valuation(), Some(0));
        let d = x.digits();
        assert_eq!(d[0], 1);
        assert!(d[1..].iter().all(|&x| x == 0));
    }

    #[test]
    fn minus_one_is_all_top_digits() {
        let x = q(-1, 1, 5);
        assert_eq!(x.valuation(), Some(0));
        assert!(x.digits().iter().all(|&d| d == 4));
        // oracle: sum 4*5^k over k < N is 5^N - 1, congruent to -1
        let n = ctx().digits() as u32;
        let s: BigInt = (0..n).map(|k| BigInt::from(4) * BigInt::from(5).pow(k)).sum();
        assert_eq!((s + 1) % BigInt::from(5).pow(n), BigInt::zero());
    }

    #[test]
    fn geometric_series_inverse() {
        // 1 / (1 - 3) = 1 + 3 + 9 + ...
        let x = q(1, 1 - 3, 3);
        assert!(x.digits().iter().all(|&d| d == 1));
        let back = x.mul(&q(-2, 1, 3)).unwrap();
        assert_eq!(back, q(1, 1, 3));
    }

    #[test]
    fn zero_denominator_rejected() {
        let e = PadicNumber::from_rational(&BigInt::one(), &BigInt::zero(), 5, ctx());
        assert_eq!(e.unwrap_err(), PadicError::ZeroDenominator);
        assert_eq!(
            PadicNumber::from_i64(3, 4, ctx()).unwrap_err(),
            PadicError::NotPrime(4)
        );
    }

    #[test]
    fn mul_and_add_examples() {
        let p = q(7, 1, 7);
        assert_eq!(p.mul(&p).unwrap().valuation(), Some(2));
        assert!(q(-1, 1, 7).add(&q(1, 1, 7)).unwrap().is_zero());
        // 1 + p*u stays a unit
        let pu = q(7 * 3, 1, 7);
        assert_eq!(q(1, 1, 7).add(&pu).unwrap().valuation(), Some(0));
    }

    #[test]
    fn prime_mismatch() {
        assert_eq!(
            q(1, 1, 3).add(&q(1, 1, 5)).unwrap_err(),
            PadicError::PrimeMismatch(3, 5)
        );
    }

    #[test]
    fn inverses() {
        assert_eq!(q(1, 1, 3).inv().unwrap(), q(1, 1, 3));
        let two_inv = q(2, 1, 3).inv().unwrap();
        // multiply-back oracle on the raw digits
        let n = ctx().digits() as u32;
        let m = BigInt::from(3).pow(n);
        let u = two_inv.to_rational();
        assert!(u.denom().is_one());
        assert_eq!((u.numer() * BigInt::from(2)).mod_floor(&m), BigInt::one());
        let pinv = q(5, 1, 5).inv().unwrap();
        assert_eq!(pinv.valuation(), Some(-1));
        assert_eq!(pinv.digits()[0], 1);
        assert!(pinv.digits()[1..].iter().all(|&d| d == 0));
        assert_eq!(PadicNumber::zero(5, ctx()).inv().unwrap_err(), PadicError::DivisionByZero);
    }

    #[test]
    fn norms() {
        assert_eq!(q(3, 1, 3).norm(), rational::rat(1, 3));
        assert_eq!(PadicNumber::zero(3, ctx()).norm(), rational::int(0));
        assert_eq!(q(4, 9, 3).norm(), rational::int(9));
    }

    #[test]
    fn membership() {
        let p = 5;
        assert!(q(1, 1, p).member(NamedSubgroup::OnePlus(1)));
        assert!(!q(5, 1, p).member(NamedSubgroup::Units));
        assert!(q(6, 1, p).member(NamedSubgroup::OnePlus(1)));
        assert!(!q(6, 1, p).member(NamedSubgroup::OnePlus(2)));
        assert!(q(26, 1, p).member(NamedSubgroup::OnePlus(2)));
        assert!(q(1, 5, p).member(NamedSubgroup::Integers) == false);
        assert!(PadicNumber::zero(p, ctx()).member(NamedSubgroup::Integers));
    }

    #[test]
    fn cancellation_lowers_precision() {
        let a = q(1 + 25 * 3, 1, 5);
        let b = q(1, 1, 5);
        let d = a.sub(&b).unwrap();
        assert_eq!(d.valuation(), Some(2));
        assert_eq!(d.precision(), ctx().digits() - 2);
    }

    #[test]
    fn text_round_trip() {
        for s in [
            "p=5 v=0 digits=1,0,0,4",
            "p=3 v=-2 digits=2,2",
            "p=7 v=inf digits=",
        ] {
            let x: PadicNumber = s.parse().unwrap();
            assert_eq!(x.to_string(), s);
        }
        assert!("p=4 v=0 digits=1".parse::<PadicNumber>().is_err());
        assert!("p=5 v=0 digits=0,1".parse::<PadicNumber>().is_err());
        assert!("p=5 v=0 digits=7".parse::<PadicNumber>().is_err());
    }
}
