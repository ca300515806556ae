//! Eigenvalue lists: the spectrum of a density matrix, as (value, multiplicity)
//! pairs in strictly decreasing order, optionally followed by a geometric tail
//! `period, ratio * period, ratio^2 * period, ...`.
//!
//! Values are exact rationals whenever the inputs are; irrational values (for
//! instance `p^{-beta}` with non-integral beta) are closed intervals with
//! outward rounding, and comparisons treat overlapping intervals as equal.

use std::cmp::Ordering;
use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::rational::{self, Rational};

/// Number of levels kept when an exact tail cannot be formed.
pub const BLOWUP_LEVELS: usize = 64;

#[derive(Debug, Error, Clone)]
pub enum ListError {
    #[error("tensor of two infinite tails has no geometric tail; truncated to {} levels, tail mass <= {tail_mass_bound:e}", .truncated.explicit.len())]
    TailBlowup {
        truncated: Box<EigenvalueList>,
        tail_mass_bound: f64,
    },
    #[error("empty eigenvalue list")]
    Empty,
}

/// A positive real, exact or enclosed in an interval.
#[derive(Debug, Clone)]
pub enum Weight {
    Exact(Rational),
    Approx { lo: f64, hi: f64 },
}

fn down(x: f64) -> f64 {
    x.next_down().next_down()
}

fn up(x: f64) -> f64 {
    x.next_up().next_up()
}

impl Weight {
    pub fn int(n: i64) -> Self {
        Weight::Exact(rational::int(n))
    }

    pub fn rat(n: i64, d: i64) -> Self {
        Weight::Exact(rational::rat(n, d))
    }

    pub fn one() -> Self {
        Self::int(1)
    }

    pub fn zero() -> Self {
        Self::int(0)
    }

    /// Interval around a float computed with a relative error of at most `rel`.
    pub fn around(x: f64, rel: f64) -> Self {
        let e = x.abs() * rel;
        Weight::Approx { lo: down(x - e), hi: up(x + e) }
    }

    pub fn exact(&self) -> Option<&Rational> {
        match self {
            Weight::Exact(r) => Some(r),
            Weight::Approx { .. } => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Weight::Exact(_))
    }

    fn bounds(&self) -> (f64, f64) {
        match self {
            Weight::Exact(r) => {
                let f = rational::to_f64(r);
                (down(f), up(f))
            }
            Weight::Approx { lo, hi } => (*lo, *hi),
        }
    }

    pub fn lo(&self) -> f64 {
        self.bounds().0
    }

    pub fn hi(&self) -> f64 {
        self.bounds().1
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Weight::Exact(r) => rational::to_f64(r),
            Weight::Approx { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Weight::Exact(r) => r.is_zero(),
            Weight::Approx { lo, hi } => *lo == 0.0 && *hi == 0.0,
        }
    }

    pub fn contains(&self, x: &Rational) -> bool {
        match self {
            Weight::Exact(r) => r == x,
            Weight::Approx { lo, hi } => {
                let f = rational::to_f64(x);
                *lo <= f && f <= *hi
            }
        }
    }

    pub fn width(&self) -> f64 {
        match self {
            Weight::Exact(_) => 0.0,
            Weight::Approx { lo, hi } => hi - lo,
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        match (self, o) {
            (Weight::Exact(a), Weight::Exact(b)) => Weight::Exact(a * b),
            _ => {
                let (a, b) = (self.bounds(), o.bounds());
                let c = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
                Weight::Approx {
                    lo: down(c.iter().copied().fold(f64::INFINITY, f64::min)),
                    hi: up(c.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                }
            }
        }
    }

    pub fn mul_int(&self, m: u64) -> Self {
        self.mul(&Weight::Exact(rational::int(m as i64)))
    }

    pub fn add(&self, o: &Self) -> Self {
        match (self, o) {
            (Weight::Exact(a), Weight::Exact(b)) => Weight::Exact(a + b),
            _ => {
                let (a, b) = (self.bounds(), o.bounds());
                Weight::Approx { lo: down(a.0 + b.0), hi: up(a.1 + b.1) }
            }
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        match (self, o) {
            (Weight::Exact(a), Weight::Exact(b)) => Weight::Exact(a - b),
            _ => {
                let (a, b) = (self.bounds(), o.bounds());
                Weight::Approx { lo: down(a.0 - b.1), hi: up(a.1 - b.0) }
            }
        }
    }

    /// Quotient; the divisor must be bounded away from 0.
    pub fn div(&self, o: &Self) -> Self {
        match (self, o) {
            (Weight::Exact(a), Weight::Exact(b)) => Weight::Exact(a / b),
            _ => {
                let (a, b) = (self.bounds(), o.bounds());
                assert!(b.0 > 0.0 || b.1 < 0.0, "division by an interval containing 0");
                let c = [a.0 / b.0, a.0 / b.1, a.1 / b.0, a.1 / b.1];
                Weight::Approx {
                    lo: down(c.iter().copied().fold(f64::INFINITY, f64::min)),
                    hi: up(c.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                }
            }
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Weight::one();
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Total order where overlapping intervals compare equal.
    pub fn cmp_value(&self, o: &Self) -> Ordering {
        match (self, o) {
            (Weight::Exact(a), Weight::Exact(b)) => a.cmp(b),
            _ => {
                let (a, b) = (self.bounds(), o.bounds());
                if a.1 < b.0 {
                    Ordering::Less
                } else if a.0 > b.1 {
                    Ordering::Greater
                } else {
                    Ordering::Equal
                }
            }
        }
    }

    /// Exact rational or decimal string.
    pub fn to_text(&self) -> String {
        match self {
            Weight::Exact(r) => rational::format_rational(r),
            Weight::Approx { .. } => format!("{:.17e}", self.to_f64()),
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Weight::Exact(r) => json!(rational::format_rational(r)),
            Weight::Approx { lo, hi } => json!({"approx": self.to_f64(), "lo": lo, "hi": hi}),
        }
    }
}

impl PartialEq for Weight {
    fn eq(&self, o: &Self) -> bool {
        self.cmp_value(o) == Ordering::Equal
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: Weight,
    pub mult: u64,
}

impl Entry {
    pub fn new(value: Weight, mult: u64) -> Self {
        Self { value, mult }
    }

    pub fn mass(&self) -> Weight {
        self.value.mul_int(self.mult)
    }
}

/// Entries `period[i] * ratio^k` for all k >= 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricTail {
    pub ratio: Weight,
    pub period: Vec<Entry>,
}

impl GeometricTail {
    pub fn mass(&self) -> Weight {
        let s = self.period.iter().fold(Weight::zero(), |acc, e| acc.add(&e.mass()));
        s.div(&Weight::one().sub(&self.ratio))
    }

    fn scaled(&self, by: &Weight) -> Vec<Entry> {
        self.period.iter().map(|e| Entry::new(e.value.mul(by), e.mult)).collect()
    }
}

/// Canonical eigenvalue list. Build through [`EigenvalueList::new`], which
/// sorts, merges and normalises the tail window.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueList {
    explicit: Vec<Entry>,
    tail: Option<GeometricTail>,
}

fn mul_mult(a: u64, b: u64) -> u64 {
    a.checked_mul(b).expect("multiplicity overflow")
}

fn sort_merge(mut v: Vec<Entry>) -> Vec<Entry> {
    v.retain(|e| e.mult > 0 && !e.value.is_zero());
    v.sort_by(|a, b| b.value.cmp_value(&a.value));
    let mut out: Vec<Entry> = Vec::with_capacity(v.len());
    for e in v {
        match out.last_mut() {
            Some(last) if last.value == e.value => last.mult += e.mult,
            _ => out.push(e),
        }
    }
    out
}

impl EigenvalueList {
    pub fn new(explicit: Vec<Entry>, tail: Option<GeometricTail>) -> Self {
        let mut explicit = explicit;
        let tail = tail.and_then(|t| {
            assert!(
                t.ratio.hi() < 1.0 && t.ratio.lo() > 0.0,
                "tail ratio must lie in (0, 1)"
            );
            let period = sort_merge(t.period);
            if period.is_empty() {
                return None;
            }
            // shift every sequence so its first retained term lies in the
            // window (ratio * T, T] with T the smallest starting value
            let floor = period.last().unwrap().value.clone();
            let mut window = Vec::with_capacity(period.len());
            for e in period {
                let mut v = e.value;
                while v.cmp_value(&floor) == Ordering::Greater {
                    explicit.push(Entry::new(v.clone(), e.mult));
                    v = v.mul(&t.ratio);
                }
                window.push(Entry::new(v, e.mult));
            }
            Some(GeometricTail { ratio: t.ratio, period: sort_merge(window) })
        });
        let mut explicit = sort_merge(explicit);
        let mut tail = tail;
        if let Some(t) = tail.as_mut() {
            // unroll until every explicit value exceeds the tail
            loop {
                let below = explicit
                    .last()
                    .is_some_and(|e| e.value.cmp_value(&t.period[0].value) != Ordering::Greater);
                if !below {
                    break;
                }
                explicit.extend(t.period.iter().cloned());
                t.period = t.scaled(&t.ratio);
                explicit = sort_merge(explicit);
            }
            // roll back explicit blocks that continue the tail upwards
            let k = t.period.len();
            loop {
                if explicit.len() < k {
                    break;
                }
                let up_block = t.scaled(&Weight::one().div(&t.ratio));
                let start = explicit.len() - k;
                if explicit[start..] == up_block[..] {
                    t.period = explicit.split_off(start);
                } else {
                    break;
                }
            }
        }
        Self { explicit, tail }
    }

    pub fn finite(entries: Vec<Entry>) -> Self {
        Self::new(entries, None)
    }

    pub fn point_mass() -> Self {
        Self::finite(vec![Entry::new(Weight::one(), 1)])
    }

    /// k equal eigenvalues 1/k.
    pub fn uniform(k: u64) -> Self {
        assert!(k >= 1);
        Self::finite(vec![Entry::new(Weight::rat(1, k as i64), k)])
    }

    pub fn explicit(&self) -> &[Entry] {
        &self.explicit
    }

    pub fn tail(&self) -> Option<&GeometricTail> {
        self.tail.as_ref()
    }

    pub fn is_infinite(&self) -> bool {
        self.tail.is_some()
    }

    /// Number of distinct values, or `None` for an infinite list.
    pub fn distinct_len(&self) -> Option<usize> {
        (!self.is_infinite()).then_some(self.explicit.len())
    }

    /// Total multiplicity (dimension of the matrix algebra) of a finite list.
    pub fn dimension(&self) -> Option<u64> {
        (!self.is_infinite()).then(|| self.explicit.iter().map(|e| e.mult).sum())
    }

    pub fn mass(&self) -> Weight {
        let m = self.explicit.iter().fold(Weight::zero(), |acc, e| acc.add(&e.mass()));
        match &self.tail {
            Some(t) => m.add(&t.mass()),
            None => m,
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.mass().contains(&rational::int(1))
    }

    pub fn top(&self) -> &Entry {
        self.explicit
            .first()
            .or_else(|| self.tail.as_ref().map(|t| &t.period[0]))
            .expect("nonempty list")
    }

    /// The first `count` distinct values in decreasing order.
    pub fn levels(&self, count: usize) -> Vec<Entry> {
        let mut out: Vec<Entry> = self.explicit.iter().take(count).cloned().collect();
        if let Some(t) = &self.tail {
            let mut block = t.period.clone();
            while out.len() < count {
                for e in &block {
                    if out.len() == count {
                        break;
                    }
                    out.push(e.clone());
                }
                block = block.iter().map(|e| Entry::new(e.value.mul(&t.ratio), e.mult)).collect();
            }
        }
        out
    }

    pub fn scale_values(&self, by: &Weight) -> Self {
        let explicit = self.explicit.iter().map(|e| Entry::new(e.value.mul(by), e.mult)).collect();
        let tail = self.tail.as_ref().map(|t| GeometricTail { ratio: t.ratio.clone(), period: t.scaled(by) });
        Self::new(explicit, tail)
    }

    /// Renormalised top `m` levels, and the removed mass.
    pub fn keep_top(&self, m: usize) -> (Self, Weight) {
        let kept = self.levels(m);
        let kept_mass = kept.iter().fold(Weight::zero(), |acc, e| acc.add(&e.mass()));
        let removed = self.mass().sub(&kept_mass);
        let inv = Weight::one().div(&kept_mass);
        let list = Self::finite(kept.into_iter().map(|e| Entry::new(e.value.mul(&inv), e.mult)).collect());
        (list, removed)
    }

    /// Smallest multiplicity over all values (explicit and tail).
    pub fn min_mult(&self) -> u64 {
        self.explicit
            .iter()
            .chain(self.tail.iter().flat_map(|t| t.period.iter()))
            .map(|e| e.mult)
            .min()
            .unwrap_or(0)
    }

    /// Lowers every multiplicity to the minimum one and renormalises;
    /// returns the new list and the removed mass.
    pub fn equalize(&self) -> (Self, Weight) {
        let m = self.min_mult();
        let clamp = |v: &[Entry]| v.iter().map(|e| Entry::new(e.value.clone(), m)).collect::<Vec<_>>();
        let explicit = clamp(&self.explicit);
        let tail = self.tail.as_ref().map(|t| GeometricTail { ratio: t.ratio.clone(), period: clamp(&t.period) });
        let reduced = Self::new(explicit, tail);
        let kept = reduced.mass();
        let removed = self.mass().sub(&kept);
        (reduced.scale_values(&Weight::one().div(&kept)), removed)
    }

    pub fn tensor(&self, other: &Self) -> Result<Self, ListError> {
        match (&self.tail, &other.tail) {
            (Some(_), Some(_)) => {
                let a = self.levels(BLOWUP_LEVELS);
                let b = other.levels(BLOWUP_LEVELS);
                let truncated = Self::finite(products(&a, &b));
                let bound = 1.0 - truncated.mass().lo();
                Err(ListError::TailBlowup { truncated: Box::new(truncated), tail_mass_bound: bound.max(0.0) })
            }
            (None, None) => Ok(Self::finite(products(&self.explicit, &other.explicit))),
            (Some(_), None) => other.tensor(self),
            (None, Some(t)) => {
                let explicit = products(&self.explicit, &other.explicit);
                let period = products(&self.explicit, &t.period);
                Ok(Self::new(explicit, Some(GeometricTail { ratio: t.ratio.clone(), period })))
            }
        }
    }

    pub fn to_json(&self) -> Json {
        let entries = |v: &[Entry]| {
            v.iter()
                .map(|e| json!({"value": e.value.to_json(), "multiplicity": e.mult}))
                .collect::<Vec<_>>()
        };
        json!({
            "explicit": entries(&self.explicit),
            "tail": self.tail.as_ref().map(|t| json!({"ratio": t.ratio.to_json(), "period": entries(&t.period)})),
            "mass": self.mass().to_json(),
        })
    }
}

fn products(a: &[Entry], b: &[Entry]) -> Vec<Entry> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(Entry::new(x.value.mul(&y.value), mul_mult(x.mult, y.mult)));
        }
    }
    out
}

/// `p^{-beta}` as an exact rational when beta is an integer, otherwise an
/// enclosing interval.
pub fn prime_power_weight(p: u64, beta: &Rational) -> Weight {
    if beta.is_integer() {
        let e = beta.to_integer().to_i64().expect("exponent fits in i64");
        return Weight::Exact(rational::prime_pow(p, -e));
    }
    let b = rational::to_f64(beta);
    let x = (-(b) * (p as f64).ln()).exp();
    Weight::around(x, 1e-14)
}

/// Exact check that a rational lies in (0, 1).
pub fn in_unit_interval(x: &Rational) -> bool {
    x.is_positive() && x < &Rational::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: i64, d: i64, m: u64) -> Entry {
        Entry::new(Weight::rat(n, d), m)
    }

    fn boca1(p: i64) -> EigenvalueList {
        EigenvalueList::new(
            vec![],
            Some(GeometricTail { ratio: Weight::rat(1, p), period: vec![e(p - 1, p, 1)] }),
        )
    }

    #[test]
    fn merges_and_sorts() {
        let l = EigenvalueList::finite(vec![e(1, 4, 1), e(1, 2, 1), e(1, 4, 1), e(1, 8, 0)]);
        assert_eq!(l.explicit(), &[e(1, 2, 1), e(1, 4, 2)]);
        assert!(l.is_normalized());
    }

    #[test]
    fn tail_normal_form_is_unique() {
        // same list written with one unrolled level
        let a = boca1(3);
        let b = EigenvalueList::new(
            vec![e(2, 3, 1)],
            Some(GeometricTail { ratio: Weight::rat(1, 3), period: vec![e(2, 9, 1)] }),
        );
        assert_eq!(a, b);
        assert!(a.explicit().is_empty());
        assert_eq!(a.mass(), Weight::one());
    }

    #[test]
    fn period_window_from_spread_entries() {
        // entries 1/2 and 1/16 with ratio 1/2: the 1/2 sequence contributes
        // explicit 1/2, 1/4, 1/8 before reaching the window (1/32, 1/16]
        let l = EigenvalueList::new(
            vec![],
            Some(GeometricTail { ratio: Weight::rat(1, 2), period: vec![e(1, 2, 1), e(1, 16, 1)] }),
        );
        let lv = l.levels(4);
        assert_eq!(lv, vec![e(1, 2, 1), e(1, 4, 1), e(1, 8, 1), e(1, 16, 2)]);
    }

    #[test]
    fn tensor_with_uniform() {
        // boca(p,1) x uniform(p-1) = p^{-(n+1)} with multiplicity p-1
        for p in [2i64, 3, 5, 7] {
            let t = boca1(p).tensor(&EigenvalueList::uniform((p - 1) as u64)).unwrap();
            let expected = EigenvalueList::new(
                vec![],
                Some(GeometricTail { ratio: Weight::rat(1, p), period: vec![e(1, p, (p - 1) as u64)] }),
            );
            assert_eq!(t, expected);
            assert_eq!(t.mass(), Weight::one());
        }
    }

    #[test]
    fn powers_squared() {
        // lambda = 1/2: values 1/(1+l)^2, l/(1+l)^2 twice, l^2/(1+l)^2
        let l = EigenvalueList::finite(vec![e(2, 3, 1), e(1, 3, 1)]);
        let sq = l.tensor(&l).unwrap();
        assert_eq!(sq.explicit(), &[e(4, 9, 1), e(2, 9, 2), e(1, 9, 1)]);
    }

    #[test]
    fn tails_blow_up() {
        match boca1(3).tensor(&boca1(5)) {
            Err(ListError::TailBlowup { truncated, tail_mass_bound }) => {
                assert!(tail_mass_bound < 1e-10);
                assert!(!truncated.is_infinite());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn keep_top_and_equalize() {
        let (top, removed) = boca1(3).keep_top(2);
        assert_eq!(removed, Weight::rat(1, 9));
        assert_eq!(top.explicit(), &[e(3, 4, 1), e(1, 4, 1)]);
        let dual = EigenvalueList::new(
            vec![e(1, 4, 3)],
            Some(GeometricTail { ratio: Weight::rat(1, 5), period: vec![e(1, 20, 4)] }),
        );
        assert!(dual.is_normalized());
        let (eq, removed) = dual.equalize();
        assert_eq!(removed, Weight::rat(1, 16));
        let expected = boca1(5).tensor(&EigenvalueList::uniform(3)).unwrap();
        assert_eq!(eq, expected);
    }

    #[test]
    fn interval_weights() {
        let w = prime_power_weight(2, &rational::rat(1, 2));
        assert!(w.lo() <= std::f64::consts::FRAC_1_SQRT_2 && std::f64::consts::FRAC_1_SQRT_2 <= w.hi());
        let list = EigenvalueList::new(
            vec![],
            Some(GeometricTail { ratio: w.clone(), period: vec![Entry::new(Weight::one().sub(&w), 1)] }),
        );
        assert!(list.is_normalized());
        assert!(list.mass().width() < 1e-12);
    }
}
