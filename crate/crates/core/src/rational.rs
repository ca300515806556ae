//! Small helpers around `BigRational`: p-adic valuations, parsing and
//! conversions shared by the measure, matched-pair and list modules.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// p-adic valuation of a nonzero integer.
pub fn int_valuation(n: &BigInt, p: u64) -> Option<i64> {
    if n.is_zero() {
        return None;
    }
    let p = BigInt::from(p);
    let mut v = 0;
    let mut m = n.clone();
    loop {
        let (q, r) = m.div_rem(&p);
        if !r.is_zero() {
            return Some(v);
        }
        m = q;
        v += 1;
    }
}

/// p-adic valuation of a rational; `None` for zero.
pub fn valuation(x: &Rational, p: u64) -> Option<i64> {
    let vn = int_valuation(x.numer(), p)?;
    let vd = int_valuation(x.denom(), p).unwrap_or(0);
    Some(vn - vd)
}

/// Strips every factor of p from n, returning (n / p^v, v).
pub fn strip_prime(n: &BigInt, p: u64) -> (BigInt, i64) {
    let pb = BigInt::from(p);
    let mut m = n.clone();
    let mut v = 0;
    if m.is_zero() {
        return (m, 0);
    }
    loop {
        let (q, r) = m.div_rem(&pb);
        if !r.is_zero() {
            return (m, v);
        }
        m = q;
        v += 1;
    }
}

/// p^e as a rational, for any integer e.
pub fn prime_pow(p: u64, e: i64) -> Rational {
    let base = BigInt::from(p).pow(e.unsigned_abs() as u32);
    if e >= 0 {
        BigRational::from_integer(base)
    } else {
        BigRational::new(BigInt::one(), base)
    }
}

pub fn biguint_pow(p: u64, e: u32) -> BigUint {
    BigUint::from(p).pow(e)
}

/// Inverse of `a` modulo `m` when gcd(a, m) = 1.
pub fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.mod_floor(m).extended_gcd(m);
    if !e.gcd.is_one() {
        return None;
    }
    Some(e.x.mod_floor(m))
}

/// Residue of the p-adic integer `x` modulo `m` (a power of p); `None` when
/// the denominator of x is divisible by p.
pub fn residue_mod(x: &Rational, m: &BigInt) -> Option<BigInt> {
    let den_inv = mod_inverse(x.denom(), m)?;
    Some((x.numer() * den_inv).mod_floor(m))
}

pub fn to_biguint(x: &BigInt) -> BigUint {
    match x.sign() {
        Sign::Minus => panic!("negative value where a residue was expected"),
        _ => x.magnitude().clone(),
    }
}

/// Parses "a", "-a", "a/b" or a decimal such as "0.25" into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.trim_start().starts_with('-');
        let whole_digits = whole.trim().trim_start_matches(['-', '+']);
        if !frac.chars().all(|c| c.is_ascii_digit()) || frac.is_empty() {
            return None;
        }
        let w: BigInt = if whole_digits.is_empty() {
            BigInt::zero()
        } else {
            whole_digits.parse().ok()?
        };
        let f: BigInt = frac.parse().ok()?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let mut r = BigRational::new(w * &scale + f, scale);
        if negative {
            r = -r;
        }
        return Some(r);
    }
    let n: BigInt = s.parse().ok()?;
    Some(BigRational::from_integer(n))
}

pub fn format_rational(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn to_f64(x: &Rational) -> f64 {
    match (x.numer().to_f64(), x.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // scale both down to keep the quotient representable
            let shift = x.numer().bits().max(x.denom().bits()).saturating_sub(1000);
            let n = (x.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (x.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            if d == 0.0 || !d.is_finite() {
                // denominator dominates
                if x.is_negative() { -0.0 } else { 0.0 }
            } else {
                n / d
            }
        }
    }
}

/// Exact rational equal to a finite f64.
pub fn from_f64(x: f64) -> Option<Rational> {
    BigRational::from_float(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valuations() {
        assert_eq!(valuation(&rat(4, 9), 3), Some(-2));
        assert_eq!(valuation(&rat(18, 5), 3), Some(2));
        assert_eq!(valuation(&int(0), 3), None);
        assert_eq!(valuation(&rat(7, 2), 2), Some(-1));
    }

    #[test]
    fn parsing() {
        assert_eq!(parse_rational("-3/6"), Some(rat(-1, 2)));
        assert_eq!(parse_rational("0.25"), Some(rat(1, 4)));
        assert_eq!(parse_rational("-0.5"), Some(rat(-1, 2)));
        assert_eq!(parse_rational("7"), Some(int(7)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
    }

    #[test]
    fn residues() {
        let m = BigInt::from(27);
        // 1/2 mod 27 = 14
        assert_eq!(residue_mod(&rat(1, 2), &m), Some(BigInt::from(14)));
        assert_eq!(residue_mod(&rat(1, 3), &m), None);
        assert_eq!(residue_mod(&int(-1), &m), Some(BigInt::from(26)));
    }

    #[test]
    fn huge_to_f64() {
        let x = prime_pow(7, -400);
        let f = to_f64(&x);
        assert!(f >= 0.0 && f < 1e-300);
    }
}
