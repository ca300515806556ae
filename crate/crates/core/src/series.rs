//! Convergence of series `Σ_{p in S} term(p)` over a prime index set.
//!
//! A term is a nonnegative sum of atoms
//!
//! ```text
//! c * (p - a)^{-s} * Π_j (1 - p^{-u_j})^{k_j}
//! ```
//!
//! each of which is squeezed between `lo * p^{-s}` and `hi * p^{-s}` for every
//! prime p in the index. A series additionally carries multiplicative factors
//! `lower_factor <= term / Σ atoms <= upper_factor`; the upper one holds for
//! every p, the lower one for all but finitely many.
//!
//! Verdicts come only from comparison rules against `Σ p^{-s}` over the index
//! family; partial sums are reported as evidence when no rule applies.

use std::fmt;

use num_traits::{Signed, Zero};
use serde::Serialize;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::rational::{self, Rational};
use crate::subset::{GrowthClass, PrimeSubset, SubsetTail};

/// Number of index primes summed for `Unknown` evidence.
pub const EVIDENCE_TERMS: usize = 10_000;

/// Relative slack added to every floating bound before it becomes rational.
const INFLATE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("atom shift {shift} is not below the smallest index prime {p_min}")]
    ShiftTooLarge { shift: u64, p_min: u64 },
    #[error("factor exponent must be positive")]
    BadFactor,
    #[error("negative coefficient or exponent")]
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub coeff: Rational,
    pub s: Rational,
    pub factors: Vec<(Rational, i32)>,
    pub shift: u64,
}

impl Atom {
    /// `coeff * p^{-s}`
    pub fn power(coeff: Rational, s: Rational) -> Self {
        Self { coeff, s, factors: vec![], shift: 0 }
    }

    /// `(1 - p^{-u})^k`
    pub fn with_factor(mut self, u: Rational, k: i32) -> Self {
        self.factors.push((u, k));
        self
    }

    /// Replaces p by p - a in the power.
    pub fn with_shift(mut self, a: u64) -> Self {
        self.shift = a;
        self
    }

    /// Folds the inner sum `Σ_{i>=0} term * p^{-i r}` into a factor.
    pub fn geometric(self, r: Rational) -> Self {
        self.with_factor(r, -1)
    }

    fn validate(&self) -> Result<(), SeriesError> {
        if self.coeff.is_negative() || self.s.is_negative() {
            return Err(SeriesError::Negative);
        }
        if self.factors.iter().any(|(u, _)| !u.is_positive()) {
            return Err(SeriesError::BadFactor);
        }
        Ok(())
    }

    pub fn eval(&self, p: u64) -> f64 {
        let pf = p as f64;
        let mut v = rational::to_f64(&self.coeff) * (pf - self.shift as f64).powf(-rational::to_f64(&self.s));
        for (u, k) in &self.factors {
            v *= (1.0 - pf.powf(-rational::to_f64(u))).powi(*k);
        }
        v
    }

    /// `(lo, hi)` with `lo p^{-s} <= atom(p) <= hi p^{-s}` for all p >= p_min.
    pub fn bounds(&self, p_min: u64) -> Result<(f64, f64), SeriesError> {
        self.validate()?;
        if self.shift > 0 && self.shift >= p_min {
            return Err(SeriesError::ShiftTooLarge { shift: self.shift, p_min });
        }
        let c = rational::to_f64(&self.coeff);
        let s = rational::to_f64(&self.s);
        let pm = p_min as f64;
        let (mut lo, mut hi) = (c, c);
        // (p - a)^{-s} / p^{-s} = (1 - a/p)^{-s}, decreasing in p
        hi *= (1.0 - self.shift as f64 / pm).powf(-s);
        for (u, k) in &self.factors {
            let f = 1.0 - pm.powf(-rational::to_f64(u));
            if *k >= 0 {
                lo *= f.powi(*k);
            } else {
                hi *= f.powi(*k);
            }
        }
        Ok((lo * (1.0 - INFLATE), hi * (1.0 + INFLATE)))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = if self.shift == 0 { "p".to_string() } else { format!("(p-{})", self.shift) };
        write!(f, "{}*{}^-{}", rational::format_rational(&self.coeff), base, rational::format_rational(&self.s))?;
        for (u, k) in &self.factors {
            write!(f, "*(1-p^-{})^{}", rational::format_rational(u), k)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimeSeries {
    pub atoms: Vec<Atom>,
    pub index: PrimeSubset,
    pub lower_factor: f64,
    pub upper_factor: f64,
}

impl PrimeSeries {
    pub fn new(atoms: Vec<Atom>, index: PrimeSubset) -> Self {
        Self { atoms, index, lower_factor: 1.0, upper_factor: 1.0 }
    }

    pub fn zero(index: PrimeSubset) -> Self {
        Self::new(vec![], index)
    }

    pub fn single(atom: Atom, index: PrimeSubset) -> Self {
        Self::new(vec![atom], index)
    }

    pub fn with_factors(mut self, lower: f64, upper: f64) -> Self {
        self.lower_factor *= lower;
        self.upper_factor *= upper;
        self
    }

    /// Termwise sum of two series over the same index.
    pub fn plus(&self, other: &Self) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        let lower = match (self.is_zero(), other.is_zero()) {
            (true, _) => other.lower_factor,
            (_, true) => self.lower_factor,
            _ => self.lower_factor.min(other.lower_factor),
        };
        Self {
            atoms,
            index: self.index.clone(),
            lower_factor: lower,
            upper_factor: self.upper_factor.max(other.upper_factor),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.upper_factor == 0.0 || self.atoms.iter().all(|a| a.coeff.is_zero())
    }

    /// Upper estimate of one term.
    pub fn term_upper(&self, p: u64) -> f64 {
        self.upper_factor * self.atoms.iter().map(|a| a.eval(p)).sum::<f64>()
    }

    /// Σ over the first `n` index primes of the upper term estimate.
    pub fn partial_sum(&self, n: usize) -> (f64, usize) {
        let primes = self.index.primes(n);
        (primes.iter().map(|&p| self.term_upper(p)).sum(), primes.len())
    }

    fn live_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().filter(|a| !a.coeff.is_zero())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Converges {
        #[serde(serialize_with = "ser_rational")]
        upper_bound: Rational,
        rule: String,
    },
    Diverges {
        rule: String,
    },
    Unknown {
        partial_sum: f64,
        terms: usize,
        rule: String,
    },
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&rational::format_rational(r))
}

impl Verdict {
    pub fn converges(&self) -> bool {
        matches!(self, Verdict::Converges { .. })
    }

    pub fn diverges(&self) -> bool {
        matches!(self, Verdict::Diverges { .. })
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Verdict::Unknown { .. })
    }

    pub fn rule(&self) -> &str {
        match self {
            Verdict::Converges { rule, .. } | Verdict::Diverges { rule } | Verdict::Unknown { rule, .. } => rule,
        }
    }

    pub fn to_json(&self) -> Json {
        serde_json::to_value(self).unwrap_or_else(|_| json!(null))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Converges { upper_bound, rule } => {
                write!(f, "CONVERGES (<= {:.6e}, {rule})", rational::to_f64(upper_bound))
            }
            Verdict::Diverges { rule } => write!(f, "DIVERGES ({rule})"),
            Verdict::Unknown { partial_sum, terms, rule } => {
                write!(f, "UNKNOWN (partial sum {partial_sum:.6e} over {terms} terms, {rule})")
            }
        }
    }
}

/// Upper bound on Σ_{p prime} p^{-s}, s > 1.
fn zeta_all(s: f64) -> f64 {
    2f64.powf(-s) + 2f64.powf(1.0 - s) / (s - 1.0)
}

/// Upper bound on Σ_n p_n^{-s} when p_1 >= 2 and p_n >= n^d, d s > 1.
fn zeta_poly(s: f64, d: f64) -> f64 {
    let ds = d * s;
    2f64.powf(-s) + 2f64.powf(-ds) + 2f64.powf(1.0 - ds) / (ds - 1.0)
}

/// Upper bound on Σ_{n>=1} p_n^{-s} when p_n >= 2^n.
fn zeta_lacunary(s: f64) -> f64 {
    1.0 / (2f64.powf(s) - 1.0)
}

fn to_rational_up(x: f64) -> Rational {
    rational::from_f64(x * (1.0 + INFLATE)).unwrap_or_else(|| rational::int(i64::MAX))
}

fn converges(bound: f64, rule: &str) -> Verdict {
    Verdict::Converges { upper_bound: to_rational_up(bound), rule: rule.into() }
}

fn diverges(rule: &str) -> Verdict {
    Verdict::Diverges { rule: rule.into() }
}

/// Decides convergence of the series by the first comparison rule that fires.
pub fn decide(series: &PrimeSeries) -> Result<Verdict, SeriesError> {
    if series.is_zero() {
        return Ok(Verdict::Converges { upper_bound: Rational::zero(), rule: "zero_series".into() });
    }
    let explicit = series.index.explicit_primes();
    let explicit_sum: f64 = explicit.iter().map(|&p| series.term_upper(p)).sum::<f64>() * (1.0 + INFLATE);
    let tail = series.index.tail();
    if *tail == SubsetTail::None {
        return Ok(converges(explicit_sum, "finite_index_set"));
    }
    let Some(&p_min) = series.index.primes(1).first() else {
        return Ok(converges(0.0, "finite_index_set"));
    };
    let atoms: Vec<&Atom> = series.live_atoms().collect();
    let mut bounds = Vec::with_capacity(atoms.len());
    for a in &atoms {
        let (_, hi) = a.bounds(p_min)?;
        bounds.push((rational::to_f64(&a.s), hi));
    }
    let s_min = atoms.iter().map(|a| a.s.clone()).min().expect("nonzero series has atoms");
    let s_min_f = rational::to_f64(&s_min);
    let one = rational::int(1);
    let up = series.upper_factor;
    let can_diverge = series.lower_factor > 0.0;
    let sum_with = |z: &dyn Fn(f64) -> f64| explicit_sum + up * bounds.iter().map(|&(s, hi)| hi * z(s)).sum::<f64>();

    let verdict = match tail {
        SubsetTail::None => unreachable!(),
        SubsetTail::AllPrimes | SubsetTail::ArithProg { .. } | SubsetTail::Growth(GrowthClass::RatioPairs { .. }) => {
            if s_min > one {
                Some(converges(sum_with(&zeta_all), "prime_zeta_converges"))
            } else if !can_diverge {
                None
            } else if s_min.is_zero() {
                Some(diverges("nonvanishing_terms_diverge"))
            } else {
                match tail {
                    SubsetTail::ArithProg { .. } => Some(diverges("dirichlet_progression")),
                    SubsetTail::Growth(_) => Some(diverges("declared_growth_verdict")),
                    _ if s_min == one => Some(diverges("sum_1_over_p_diverges")),
                    _ => Some(diverges("prime_power_sum_diverges")),
                }
            }
        }
        SubsetTail::Growth(GrowthClass::Polynomial { degree }) => {
            let d = *degree as f64;
            if s_min.clone() * rational::int(*degree as i64) > one {
                Some(converges(sum_with(&|s| zeta_poly(s, d)), "polynomial_growth_comparison"))
            } else if s_min.is_zero() && can_diverge {
                Some(diverges("nonvanishing_terms_diverge"))
            } else {
                None
            }
        }
        SubsetTail::Growth(GrowthClass::Lacunary) => {
            if s_min_f > 0.0 {
                Some(converges(sum_with(&zeta_lacunary), "lacunary_comparison"))
            } else if can_diverge {
                Some(diverges("nonvanishing_terms_diverge"))
            } else {
                None
            }
        }
    };
    Ok(verdict.unwrap_or_else(|| {
        let (partial_sum, terms) = series.partial_sum(EVIDENCE_TERMS);
        Verdict::Unknown { partial_sum, terms, rule: "no_symbolic_rule".into() }
    }))
}

/// `Σ_p 1/p` over the index.
pub fn reciprocal_sum(index: &PrimeSubset) -> PrimeSeries {
    PrimeSeries::single(Atom::power(rational::int(1), rational::int(1)), index.clone())
}
