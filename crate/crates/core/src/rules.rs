//! Prime-indexed eigenvalue-list rules.
//!
//! A [`ListRule`] produces one eigenvalue list per prime. Corner lists are
//! always computed by coset enumeration; for classification each rule is
//! also recognised as a closed-form [`Shape`] whose series profiles
//! (deficit `1 - λ1`, off-top mass `1 - m1 λ1`, removed masses) are known
//! symbolically.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, ToPrimitive};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::eigen::{prime_power_weight, EigenvalueList, Entry, GeometricTail, ListError, Weight};
use crate::haar::{CompactOpenSet, HaarError, MeasureKind, SetExpr, UnitSubgroup};
use crate::rational::{self, Rational};
use crate::series::{Atom, PrimeSeries};
use crate::subset::PrimeSubset;

#[derive(Debug, Error, Clone)]
pub enum RuleError {
    #[error("no measure of the required family gives mass 1 (K: MULT/MU, L: ADD/NU)")]
    NotNormalized,
    #[error("L is not invariant under K")]
    NotInvariant,
    #[error("K must be Z_p* or 1 + p^k Z_p")]
    NotASubgroup,
    #[error("L must be a nonempty compact open subset of Z_p")]
    NotIntegral,
    #[error("rule has no closed-form profile: {0}")]
    GrammarEscape(String),
    #[error("invalid rule parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Haar(HaarError),
    #[error(transparent)]
    List(#[from] ListError),
}

impl From<HaarError> for RuleError {
    fn from(e: HaarError) -> Self {
        match e {
            HaarError::NotInvariant => RuleError::NotInvariant,
            other => RuleError::Haar(other),
        }
    }
}

type Result<T> = std::result::Result<T, RuleError>;

/// Size of a uniform block: a constant or `max(p - j, 1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SizeRule {
    Const(u64),
    PrimeMinus(u64),
}

impl SizeRule {
    pub fn eval(&self, p: u64) -> u64 {
        match self {
            SizeRule::Const(k) => *k,
            SizeRule::PrimeMinus(j) => p.saturating_sub(*j).max(1),
        }
    }

    /// Whether infinitely many primes give a block of size >= 2.
    pub fn eventually_nontrivial(&self) -> bool {
        match self {
            SizeRule::Const(k) => *k >= 2,
            SizeRule::PrimeMinus(_) => true,
        }
    }
}

impl fmt::Display for SizeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SizeRule::Const(k) => write!(f, "{k}"),
            SizeRule::PrimeMinus(j) => write!(f, "p-{j}"),
        }
    }
}

impl FromStr for SizeRule {
    type Err = RuleError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || RuleError::InvalidParameter(format!("uniform size {s}"));
        if s == "p" {
            return Ok(SizeRule::PrimeMinus(0));
        }
        if let Some(j) = s.strip_prefix("p-") {
            return j.trim().parse().map(SizeRule::PrimeMinus).map_err(|_| bad());
        }
        match s.parse::<u64>() {
            Ok(k) if k >= 1 => Ok(SizeRule::Const(k)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ListRule {
    PointMass,
    /// Lists of the corner `e(K, L)`.
    Corner { k: SetExpr, l: SetExpr },
    /// `p^{-n beta}(1 - p^{-beta})`, n >= 0.
    Boca { beta: Rational },
    /// `{1/(1+lambda), lambda/(1+lambda)}`.
    Powers { lambda: Rational },
    Uniform(SizeRule),
    Tensor(Vec<ListRule>),
    /// Top `levels` values, renormalised.
    Truncated { inner: Box<ListRule>, levels: usize },
    /// Every multiplicity lowered to the smallest one, renormalised.
    Equalized { inner: Box<ListRule> },
}

fn dual_expr() -> (SetExpr, SetExpr) {
    (SetExpr::OnePlusP(1), SetExpr::units_minus_one())
}

impl ListRule {
    pub fn corner_units() -> Self {
        ListRule::Corner { k: SetExpr::Units, l: SetExpr::integers() }
    }

    pub fn corner_dual() -> Self {
        let (k, l) = dual_expr();
        ListRule::Corner { k, l }
    }

    pub fn corner_ls() -> Self {
        ListRule::Corner { k: SetExpr::OnePlusP(1), l: SetExpr::integers() }
    }

    pub fn boca(beta: Rational) -> Self {
        ListRule::Boca { beta }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ListRule::Boca { beta } if !(beta.is_positive() && beta <= &Rational::one()) => {
                Err(RuleError::InvalidParameter(format!("beta = {} outside (0, 1]", rational::format_rational(beta))))
            }
            ListRule::Powers { lambda } if !crate::eigen::in_unit_interval(lambda) => Err(RuleError::InvalidParameter(
                format!("lambda = {} outside (0, 1)", rational::format_rational(lambda)),
            )),
            ListRule::Uniform(SizeRule::Const(0)) => Err(RuleError::InvalidParameter("uniform size 0".into())),
            ListRule::Truncated { levels: 0, .. } => Err(RuleError::InvalidParameter("truncation to 0 levels".into())),
            ListRule::Tensor(v) => v.iter().try_for_each(ListRule::validate),
            ListRule::Truncated { inner, .. } | ListRule::Equalized { inner } => inner.validate(),
            _ => Ok(()),
        }
    }

    /// The list at prime p; corners by coset enumeration.
    pub fn list_at(&self, p: u64) -> Result<EigenvalueList> {
        match self {
            ListRule::PointMass => Ok(EigenvalueList::point_mass()),
            ListRule::Corner { k, l } => corner_list_auto(&k.instantiate(p)?, &l.instantiate(p)?),
            ListRule::Boca { beta } => Ok(boca_list(p, beta)),
            ListRule::Powers { lambda } => Ok(powers_list(lambda)),
            ListRule::Uniform(k) => Ok(EigenvalueList::uniform(k.eval(p))),
            ListRule::Tensor(v) => {
                let mut acc = EigenvalueList::point_mass();
                for r in v {
                    acc = acc.tensor(&r.list_at(p)?)?;
                }
                Ok(acc)
            }
            ListRule::Truncated { inner, levels } => Ok(inner.list_at(p)?.keep_top(*levels).0),
            ListRule::Equalized { inner } => Ok(inner.list_at(p)?.equalize().0),
        }
    }

    /// Closed-form shape. Corners are matched against known shapes on a set
    /// of probe primes.
    pub fn shape(&self) -> Result<Shape> {
        self.validate()?;
        match self {
            ListRule::PointMass => Ok(Shape::PointMass),
            ListRule::Boca { beta } => Ok(Shape::Boca(beta.clone())),
            ListRule::Powers { lambda } => Ok(Shape::Powers(lambda.clone())),
            ListRule::Uniform(k) => Ok(match k {
                SizeRule::Const(1) => Shape::PointMass,
                _ => Shape::Uniform(k.clone()),
            }),
            ListRule::Corner { k, l } => recognize_corner(k, l),
            ListRule::Tensor(v) => Ok(Shape::tensor(v.iter().map(ListRule::shape).collect::<Result<Vec<_>>>()?)),
            ListRule::Truncated { inner, levels } => inner.shape()?.truncate(*levels),
            ListRule::Equalized { inner } => inner.shape()?.equalize(),
        }
    }

    pub fn to_json(&self) -> Json {
        let r = |x: &Rational| rational::format_rational(x);
        match self {
            ListRule::PointMass => json!({"kind": "point_mass"}),
            ListRule::Corner { k, l } => json!({"kind": "corner", "K": k.to_string(), "L": l.to_string()}),
            ListRule::Boca { beta } => json!({"kind": "boca", "beta": r(beta)}),
            ListRule::Powers { lambda } => json!({"kind": "powers", "lambda": r(lambda)}),
            ListRule::Uniform(k) => json!({"kind": "uniform", "k": k.to_string()}),
            ListRule::Tensor(v) => json!({"kind": "tensor", "factors": v.iter().map(ListRule::to_json).collect::<Vec<_>>()}),
            ListRule::Truncated { inner, levels } => json!({"kind": "truncated", "inner": inner.to_json(), "levels": levels}),
            ListRule::Equalized { inner } => json!({"kind": "equalized", "inner": inner.to_json()}),
        }
    }

    pub fn from_json(v: &Json) -> Result<Self> {
        let bad = |m: &str| RuleError::InvalidParameter(format!("{m} in {v}"));
        let kind = v.get("kind").and_then(Json::as_str).ok_or_else(|| bad("missing kind"))?;
        let text = |key: &str| -> Result<String> {
            match v.get(key) {
                Some(Json::String(s)) => Ok(s.clone()),
                Some(Json::Number(n)) => Ok(n.to_string()),
                _ => Err(bad(key)),
            }
        };
        let rat = |key: &str| -> Result<Rational> { rational::parse_rational(&text(key)?).ok_or_else(|| bad(key)) };
        let inner = || -> Result<Box<ListRule>> { Ok(Box::new(ListRule::from_json(v.get("inner").ok_or_else(|| bad("inner"))?)?)) };
        let rule = match kind {
            "point_mass" => ListRule::PointMass,
            "corner" => ListRule::Corner {
                k: text("K")?.parse().map_err(RuleError::Haar)?,
                l: text("L")?.parse().map_err(RuleError::Haar)?,
            },
            "boca" => ListRule::Boca { beta: rat("beta")? },
            "powers" => ListRule::Powers { lambda: rat("lambda")? },
            "uniform" => ListRule::Uniform(text("k")?.parse()?),
            "tensor" => ListRule::Tensor(
                v.get("factors")
                    .and_then(Json::as_array)
                    .ok_or_else(|| bad("factors"))?
                    .iter()
                    .map(ListRule::from_json)
                    .collect::<Result<_>>()?,
            ),
            "truncated" => ListRule::Truncated {
                inner: inner()?,
                levels: v.get("levels").and_then(Json::as_u64).ok_or_else(|| bad("levels"))? as usize,
            },
            "equalized" => ListRule::Equalized { inner: inner()? },
            other => return Err(bad(&format!("unknown kind {other}"))),
        };
        rule.validate()?;
        Ok(rule)
    }

    /// Short command-line names: `corner-units`, `corner-dual`, `corner-ls`,
    /// `boca:beta`, `powers:lambda`, `uniform:k`, `point-mass`.
    pub fn from_cli_name(s: &str) -> Result<Self> {
        let bad = || RuleError::InvalidParameter(format!("unknown rule {s}"));
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| a.and_then(rational::parse_rational).ok_or_else(bad);
        let rule = match name {
            "corner-units" => ListRule::corner_units(),
            "corner-dual" => ListRule::corner_dual(),
            "corner-ls" => ListRule::corner_ls(),
            "point-mass" => ListRule::PointMass,
            "boca" => ListRule::Boca { beta: num(arg)? },
            "powers" => ListRule::Powers { lambda: num(arg)? },
            "uniform" => ListRule::Uniform(arg.ok_or_else(bad)?.parse()?),
            _ => return Err(bad()),
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl fmt::Display for ListRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = rational::format_rational;
        match self {
            ListRule::PointMass => write!(f, "POINT_MASS"),
            ListRule::Corner { k, l } => write!(f, "CORNER({k}, {l})"),
            ListRule::Boca { beta } => write!(f, "BOCA({})", r(beta)),
            ListRule::Powers { lambda } => write!(f, "POWERS({})", r(lambda)),
            ListRule::Uniform(k) => write!(f, "UNIFORM({k})"),
            ListRule::Tensor(v) => {
                let parts: Vec<String> = v.iter().map(ToString::to_string).collect();
                write!(f, "{}", parts.join(" x "))
            }
            ListRule::Truncated { inner, levels } => write!(f, "TOP{levels}({inner})"),
            ListRule::Equalized { inner } => write!(f, "EQUALIZED({inner})"),
        }
    }
}

/// Corner list of `e(K, L)` with explicit normalisations `mu(K) = 1`,
/// `nu(L) = 1`: values `ADD(K)/ADD(L) p^{-n}` with multiplicity the number of
/// K-orbits in `L ∩ p^n Z_p*`.
pub fn corner_list(
    k: &CompactOpenSet,
    l: &CompactOpenSet,
    mu: MeasureKind,
    nu: MeasureKind,
) -> Result<EigenvalueList> {
    if k.measure(mu)? != rational::int(1) || l.measure(nu)? != rational::int(1) {
        return Err(RuleError::NotNormalized);
    }
    let p = k.prime();
    let group = subgroup_of(k)?;
    if l.is_empty() || !l.is_subset_of_integers() {
        return Err(RuleError::NotIntegral);
    }
    if !l.is_invariant(group) {
        return Err(RuleError::NotInvariant);
    }
    let base = k.measure(MeasureKind::Add)? / l.measure(MeasureKind::Add)?;
    let value = |n: u32| base.clone() * rational::prime_pow(p, -(n as i64));
    let r = l.resolution().unwrap_or(0).max(0) as u32;
    let mut explicit = Vec::new();
    for n in 0..=r {
        let c = l.coset_count(n, group)?;
        explicit.push(Entry::new(Weight::Exact(value(n)), c));
    }
    let tail = if l.contains_zero() {
        // p^n Z_p* ⊆ L for n > r; the orbit count is constant from there on
        let c = l.coset_count(r + 1, group)?;
        Some(GeometricTail {
            ratio: Weight::Exact(rational::rat(1, p as i64)),
            period: vec![Entry::new(Weight::Exact(value(r + 1)), c)],
        })
    } else {
        None
    };
    Ok(EigenvalueList::new(explicit, tail))
}

/// [`corner_list`] with the measures chosen to normalise K (MULT or MU) and
/// L (ADD or NU).
pub fn corner_list_auto(k: &CompactOpenSet, l: &CompactOpenSet) -> Result<EigenvalueList> {
    let one = rational::int(1);
    let mu = [MeasureKind::Mult, MeasureKind::Mu]
        .into_iter()
        .find(|m| k.measure(*m).is_ok_and(|v| v == one))
        .ok_or(RuleError::NotNormalized)?;
    let nu = [MeasureKind::Add, MeasureKind::Nu]
        .into_iter()
        .find(|m| l.measure(*m).is_ok_and(|v| v == one))
        .ok_or(RuleError::NotNormalized)?;
    corner_list(k, l, mu, nu)
}

fn subgroup_of(k: &CompactOpenSet) -> Result<UnitSubgroup> {
    let p = k.prime();
    if *k == CompactOpenSet::units(p)? {
        return Ok(UnitSubgroup::Units);
    }
    let top = k.resolution().unwrap_or(0);
    for level in 1..=top.max(1) {
        if *k == CompactOpenSet::ball(p, &rational::int(1), level)? {
            return Ok(UnitSubgroup::OnePlus(level as u32));
        }
    }
    Err(RuleError::NotASubgroup)
}

/// `p^{-n beta}(1 - p^{-beta})`, multiplicity 1.
pub fn boca_list(p: u64, beta: &Rational) -> EigenvalueList {
    let r = prime_power_weight(p, beta);
    let top = Weight::one().sub(&r);
    EigenvalueList::new(vec![], Some(GeometricTail { ratio: r, period: vec![Entry::new(top, 1)] }))
}

pub fn powers_list(lambda: &Rational) -> EigenvalueList {
    let one = rational::int(1);
    let z = &one + lambda;
    EigenvalueList::finite(vec![
        Entry::new(Weight::Exact(&one / &z), 1),
        Entry::new(Weight::Exact(lambda / &z), 1),
    ])
}

/// Closed form of the dual corner list: `1/(p-1)` with multiplicity p-2,
/// then `p^{-n}/(p-1)` with multiplicity p-1 for n >= 1.
pub fn dual_list(p: u64) -> EigenvalueList {
    let pi = p as i64;
    EigenvalueList::new(
        vec![Entry::new(Weight::rat(1, pi - 1), p - 2)],
        Some(GeometricTail {
            ratio: Weight::rat(1, pi),
            period: vec![Entry::new(Weight::rat(1, pi * (pi - 1)), p - 1)],
        }),
    )
}

const PROBE_PRIMES: [u64; 5] = [3, 5, 7, 11, 13];

fn recognize_corner(k: &SetExpr, l: &SetExpr) -> Result<Shape> {
    let candidates = [
        Shape::Boca(rational::int(1)),
        Shape::Tensor(vec![Shape::Boca(rational::int(1)), Shape::Uniform(SizeRule::PrimeMinus(1))]),
        Shape::Dual,
    ];
    let lists = PROBE_PRIMES
        .iter()
        .map(|&p| corner_list_auto(&k.instantiate(p)?, &l.instantiate(p)?))
        .collect::<Result<Vec<_>>>()?;
    for c in candidates {
        let mut matches = true;
        for (&p, list) in PROBE_PRIMES.iter().zip(&lists) {
            if c.list_at(p)? != *list {
                matches = false;
                break;
            }
        }
        if matches {
            return Ok(c);
        }
    }
    Err(RuleError::GrammarEscape(format!("corner ({k}, {l})")))
}

/// Closed-form list families with known series profiles.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    PointMass,
    Boca(Rational),
    /// The dual corner list, see [`dual_list`].
    Dual,
    Powers(Rational),
    Uniform(SizeRule),
    Tensor(Vec<Shape>),
    /// Top `levels` values of `Boca(beta)`, renormalised; levels >= 2.
    TruncBoca { beta: Rational, levels: usize },
}

fn c(x: Rational) -> Atom {
    Atom::power(x, rational::int(0))
}

fn f2(x: f64) -> f64 {
    x.max(0.0)
}

impl Shape {
    fn tensor(parts: Vec<Shape>) -> Shape {
        let mut flat = Vec::new();
        for s in parts {
            match s {
                Shape::Tensor(v) => flat.extend(v),
                Shape::PointMass => {}
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Shape::PointMass,
            1 => flat.pop().unwrap(),
            _ => Shape::Tensor(flat),
        }
    }

    fn is_equal_mult(&self) -> bool {
        match self {
            Shape::Dual => false,
            Shape::Tensor(v) => v.iter().all(Shape::is_equal_mult),
            _ => true,
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Shape::Uniform(_) | Shape::PointMass)
    }

    fn truncate(self, m: usize) -> Result<Shape> {
        if m == 0 {
            return Err(RuleError::InvalidParameter("truncation to 0 levels".into()));
        }
        Ok(match self {
            Shape::PointMass | Shape::Uniform(_) => self,
            Shape::Boca(_) | Shape::TruncBoca { .. } if m == 1 => Shape::PointMass,
            Shape::Boca(beta) => Shape::TruncBoca { beta, levels: m },
            Shape::TruncBoca { beta, levels } => Shape::TruncBoca { beta, levels: levels.min(m) },
            Shape::Powers(_) if m == 1 => Shape::PointMass,
            Shape::Powers(_) => self,
            Shape::Tensor(v) => {
                let (uniform, rest): (Vec<Shape>, Vec<Shape>) = v.into_iter().partition(Shape::is_uniform);
                if rest.len() != 1 {
                    return Err(RuleError::GrammarEscape("truncation of a tensor with several non-uniform factors".into()));
                }
                let mut parts = uniform;
                parts.push(rest.into_iter().next().unwrap().truncate(m)?);
                Shape::tensor(parts)
            }
            Shape::Dual => return Err(RuleError::GrammarEscape("truncated dual corner".into())),
        })
    }

    fn equalize(self) -> Result<Shape> {
        match self {
            Shape::Dual => Ok(Shape::Tensor(vec![
                Shape::Boca(rational::int(1)),
                Shape::Uniform(SizeRule::PrimeMinus(2)),
            ])),
            s if s.is_equal_mult() => Ok(s),
            _ => Err(RuleError::GrammarEscape("equalized tensor containing the dual corner".into())),
        }
    }

    pub fn contains_dual(&self) -> bool {
        match self {
            Shape::Dual => true,
            Shape::Tensor(v) => v.iter().any(Shape::contains_dual),
            _ => false,
        }
    }

    /// Exact closed-form list at p.
    pub fn list_at(&self, p: u64) -> Result<EigenvalueList> {
        Ok(match self {
            Shape::PointMass => EigenvalueList::point_mass(),
            Shape::Boca(beta) => boca_list(p, beta),
            Shape::Dual => dual_list(p),
            Shape::Powers(l) => powers_list(l),
            Shape::Uniform(k) => EigenvalueList::uniform(k.eval(p)),
            Shape::TruncBoca { beta, levels } => boca_list(p, beta).keep_top(*levels).0,
            Shape::Tensor(v) => {
                let mut acc = EigenvalueList::point_mass();
                for s in v {
                    acc = acc.tensor(&s.list_at(p)?)?;
                }
                acc
            }
        })
    }

    /// Top `m` levels at p as floats, decreasing.
    pub fn numeric_levels(&self, p: u64, m: usize) -> Vec<(f64, u64)> {
        let pf = p as f64;
        let mut out = match self {
            Shape::PointMass => vec![(1.0, 1)],
            Shape::Boca(beta) | Shape::TruncBoca { beta, .. } => {
                let r = pf.powf(-rational::to_f64(beta));
                let (n, norm) = match self {
                    Shape::TruncBoca { levels, .. } => (m.min(*levels), 1.0 - r.powi(*levels as i32)),
                    _ => (m, 1.0),
                };
                let mut v = (1.0 - r) / norm;
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    out.push((v, 1));
                    v *= r;
                }
                out
            }
            Shape::Dual => {
                let mut out = Vec::with_capacity(m);
                if p > 2 {
                    out.push((1.0 / (pf - 1.0), p - 2));
                }
                let mut v = 1.0 / (pf * (pf - 1.0));
                while out.len() < m {
                    out.push((v, p - 1));
                    v /= pf;
                }
                out
            }
            Shape::Powers(l) => {
                let l = rational::to_f64(l);
                vec![(1.0 / (1.0 + l), 1), (l / (1.0 + l), 1)]
            }
            Shape::Uniform(k) => {
                let k = k.eval(p);
                vec![(1.0 / k as f64, k)]
            }
            Shape::Tensor(v) => {
                let mut acc = vec![(1.0, 1u64)];
                for s in v {
                    let next = s.numeric_levels(p, m);
                    let mut prod = Vec::with_capacity(acc.len() * next.len());
                    for &(a, ma) in &acc {
                        for &(b, mb) in &next {
                            prod.push((a * b, ma.saturating_mul(mb)));
                        }
                    }
                    acc = merge_numeric(prod);
                    acc.truncate(m);
                }
                acc
            }
        };
        out.truncate(m);
        out
    }

    /// Whether the list does not depend on p.
    pub fn is_p_independent(&self) -> bool {
        match self {
            Shape::PointMass | Shape::Powers(_) | Shape::Uniform(SizeRule::Const(_)) => true,
            Shape::Tensor(v) => v.iter().all(Shape::is_p_independent),
            _ => false,
        }
    }

    pub fn is_infinite(&self) -> bool {
        match self {
            Shape::Boca(_) | Shape::Dual => true,
            Shape::Tensor(v) => v.iter().any(Shape::is_infinite),
            _ => false,
        }
    }

    /// Whether the list has at least two eigenvalues (counted with
    /// multiplicity) at all but finitely many primes.
    pub fn is_nontrivial(&self) -> bool {
        match self {
            Shape::PointMass => false,
            Shape::Uniform(k) => k.eventually_nontrivial(),
            Shape::Tensor(v) => v.iter().any(Shape::is_nontrivial),
            _ => true,
        }
    }

    /// Matrix size at p for finite lists.
    pub fn dimension(&self, p: u64) -> Option<u64> {
        match self {
            Shape::PointMass => Some(1),
            Shape::Powers(_) => Some(2),
            Shape::Uniform(k) => Some(k.eval(p)),
            Shape::TruncBoca { levels, .. } => Some(*levels as u64),
            Shape::Boca(_) | Shape::Dual => None,
            Shape::Tensor(v) => v.iter().try_fold(1u64, |acc, s| s.dimension(p).map(|d| acc.saturating_mul(d))),
        }
    }

    /// Lower bound on the top eigenvalue over all primes.
    pub fn top_lower(&self) -> f64 {
        match self {
            Shape::PointMass => 1.0,
            Shape::Boca(beta) | Shape::TruncBoca { beta, .. } => f2(1.0 - 2f64.powf(-rational::to_f64(beta))),
            Shape::Dual => 0.0,
            Shape::Powers(l) => 1.0 / (1.0 + rational::to_f64(l)),
            // 1/k -> 0 along the primes for p - j
            Shape::Uniform(SizeRule::Const(k)) => 1.0 / *k as f64,
            Shape::Uniform(SizeRule::PrimeMinus(_)) => 0.0,
            Shape::Tensor(v) => v.iter().map(Shape::top_lower).product(),
        }
    }

    /// Lower bound on λ1/λ2 over all primes; `None` for single-level lists.
    pub fn gap(&self) -> Option<f64> {
        match self {
            Shape::PointMass | Shape::Uniform(_) => None,
            Shape::Boca(beta) | Shape::TruncBoca { beta, .. } => Some(2f64.powf(rational::to_f64(beta))),
            Shape::Dual => Some(2.0),
            Shape::Powers(l) => Some(1.0 / rational::to_f64(l)),
            Shape::Tensor(v) => v.iter().filter_map(Shape::gap).reduce(f64::min),
        }
    }

    /// Series of deficits `1 - λ1`.
    pub fn deficit(&self, index: &PrimeSubset) -> PrimeSeries {
        match self {
            Shape::Uniform(SizeRule::Const(k)) => {
                PrimeSeries::single(c(rational::int(1) - rational::rat(1, *k as i64)), index.clone())
            }
            // 1 - 1/max(p-j, 1) lies in [1/2, 1) once p - j >= 2
            Shape::Uniform(SizeRule::PrimeMinus(_)) | Shape::Dual => {
                PrimeSeries::single(c(rational::int(1)), index.clone()).with_factors(0.5, 1.0)
            }
            Shape::Tensor(v) => combine(v.iter().map(|s| s.deficit(index)).collect(), index),
            _ => self.off_top(index),
        }
    }

    /// Series of off-top masses `1 - m1 λ1`.
    pub fn off_top(&self, index: &PrimeSubset) -> PrimeSeries {
        let one = rational::int(1);
        match self {
            Shape::PointMass | Shape::Uniform(_) => PrimeSeries::zero(index.clone()),
            Shape::Boca(beta) => PrimeSeries::single(Atom::power(one, beta.clone()), index.clone()),
            // exactly 1/(p-1) for p >= 3; 1/2 <= 1 at p = 2
            Shape::Dual => PrimeSeries::single(Atom::power(one.clone(), one.clone()).with_factor(one, -1), index.clone()),
            Shape::Powers(l) => PrimeSeries::single(c(l / (&one + l)), index.clone()),
            Shape::TruncBoca { beta, levels } => {
                let b = rational::to_f64(beta);
                let m = *levels as f64;
                PrimeSeries::single(Atom::power(one, beta.clone()), index.clone())
                    .with_factors(1.0 - 2f64.powf(-(m - 1.0) * b), 1.0 / (1.0 - 2f64.powf(-m * b)))
            }
            Shape::Tensor(v) => combine(v.iter().map(|s| s.off_top(index)).collect(), index),
        }
    }

    /// Series of masses removed by keeping the top `m` levels.
    pub fn removed_top(&self, m: usize, index: &PrimeSubset) -> Result<PrimeSeries> {
        if m == 0 {
            return Err(RuleError::InvalidParameter("keep at least one level".into()));
        }
        let one = rational::int(1);
        let mr = rational::int(m as i64);
        Ok(match self {
            Shape::PointMass | Shape::Uniform(_) => PrimeSeries::zero(index.clone()),
            Shape::Boca(beta) => PrimeSeries::single(Atom::power(one, beta * mr), index.clone()),
            // p^{-m}/(1 - 1/p), exact for p >= 3, an upper bound at p = 2
            Shape::Dual => PrimeSeries::single(Atom::power(one.clone(), mr).with_factor(one, -1), index.clone()),
            Shape::Powers(_) if m == 1 => self.off_top(index),
            Shape::Powers(_) => PrimeSeries::zero(index.clone()),
            Shape::TruncBoca { levels, .. } if m >= *levels => PrimeSeries::zero(index.clone()),
            Shape::TruncBoca { beta, levels } => {
                let b = rational::to_f64(beta);
                let (k, lv) = (m as f64, *levels as f64);
                PrimeSeries::single(Atom::power(one, beta * mr), index.clone())
                    .with_factors(1.0 - 2f64.powf(-(lv - k) * b), 1.0 / (1.0 - 2f64.powf(-lv * b)))
            }
            Shape::Tensor(_) if m == 1 => self.off_top(index),
            Shape::Tensor(v) => {
                let rest: Vec<&Shape> = v.iter().filter(|s| !s.is_uniform()).collect();
                if rest.len() != 1 {
                    return Err(RuleError::GrammarEscape("top-m reduction of a tensor with several non-uniform factors".into()));
                }
                rest[0].removed_top(m, index)?
            }
        })
    }

    /// Series of masses removed by equalising multiplicities.
    pub fn removed_equalize(&self, index: &PrimeSubset) -> Result<PrimeSeries> {
        match self {
            // exactly (p-1)^{-2}; 0 at p = 2
            Shape::Dual => Ok(PrimeSeries::single(
                Atom::power(rational::int(1), rational::int(2)).with_shift(1),
                index.clone(),
            )),
            s if s.is_equal_mult() => Ok(PrimeSeries::zero(index.clone())),
            _ => Err(RuleError::GrammarEscape("equalize of a tensor containing the dual corner".into())),
        }
    }
}

/// Bounds for `1 - Π(1 - x_i)` between `max x_i` and `Σ x_i`.
fn combine(parts: Vec<PrimeSeries>, index: &PrimeSubset) -> PrimeSeries {
    let live: Vec<PrimeSeries> = parts.into_iter().filter(|s| !s.is_zero()).collect();
    if live.is_empty() {
        return PrimeSeries::zero(index.clone());
    }
    let n = live.len() as f64;
    let lower = live.iter().map(|s| s.lower_factor).fold(f64::INFINITY, f64::min) / n;
    let upper = live.iter().map(|s| s.upper_factor).fold(0.0, f64::max);
    let atoms = live.into_iter().flat_map(|s| s.atoms).collect();
    PrimeSeries { atoms, index: index.clone(), lower_factor: lower, upper_factor: upper }
}

fn merge_numeric(mut v: Vec<(f64, u64)>) -> Vec<(f64, u64)> {
    v.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out: Vec<(f64, u64)> = Vec::with_capacity(v.len());
    for (x, m) in v {
        match out.last_mut() {
            Some(last) if (last.0 - x).abs() <= 1e-12 * last.0 => last.1 = last.1.saturating_add(m),
            _ => out.push((x, m)),
        }
    }
    out
}

/// Total multiplicity as f64 weight of a numeric level list.
pub fn numeric_mass(levels: &[(f64, u64)]) -> f64 {
    levels.iter().map(|&(v, m)| v * m as f64).sum()
}

/// Integer part of a rational, for CLI display of sizes.
pub fn rational_to_u64(x: &Rational) -> Option<u64> {
    x.is_integer().then(|| x.to_integer().to_u64()).flatten()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn tail_list(ratio: Rational, period: Vec<(Rational, u64)>, explicit: Vec<(Rational, u64)>) -> EigenvalueList {
        let e = |v: Vec<(Rational, u64)>| v.into_iter().map(|(x, m)| Entry::new(Weight::Exact(x), m)).collect();
        EigenvalueList::new(e(explicit), Some(GeometricTail { ratio: Weight::Exact(ratio), period: e(period) }))
    }

    #[test]
    fn corner_closed_forms() {
        for p in [2u64, 3, 5, 7, 11] {
            let pi = p as i64;
            let units = ListRule::corner_units().list_at(p).unwrap();
            assert_eq!(units, tail_list(rat(1, pi), vec![(int(1) - rat(1, pi), 1)], vec![]));
            let dual = ListRule::corner_dual().list_at(p).unwrap();
            let expected = tail_list(rat(1, pi), vec![(rat(1, pi * (pi - 1)), p - 1)], vec![(rat(1, pi - 1), p - 2)]);
            assert_eq!(dual, expected, "p={p}");
            assert_eq!(dual, dual_list(p));
            let ls = ListRule::corner_ls().list_at(p).unwrap();
            assert_eq!(ls, tail_list(rat(1, pi), vec![(rat(1, pi), p - 1)], vec![]));
            for l in [&units, &dual, &ls] {
                assert_eq!(l.mass(), Weight::one());
            }
        }
    }

    #[test]
    fn p3_dual_list_levels() {
        let l = ListRule::corner_dual().list_at(3).unwrap();
        let lv = l.levels(3);
        assert_eq!(lv[0], Entry::new(Weight::rat(1, 2), 1));
        assert_eq!(lv[1], Entry::new(Weight::rat(1, 6), 2));
        assert_eq!(lv[2], Entry::new(Weight::rat(1, 18), 2));
    }

    #[test]
    fn normalisation_is_checked() {
        let k = CompactOpenSet::units(5).unwrap();
        let l = CompactOpenSet::integers(5).unwrap();
        assert!(matches!(corner_list(&k, &l, MeasureKind::Mu, MeasureKind::Add), Err(RuleError::NotNormalized)));
        let bad_k = CompactOpenSet::ball(5, &int(2), 1).unwrap();
        assert!(matches!(corner_list_auto(&bad_k, &l), Err(RuleError::NotNormalized | RuleError::NotASubgroup)));
        let l2 = CompactOpenSet::ball(5, &int(1), 2).unwrap().union(&CompactOpenSet::ball(5, &int(0), 1).unwrap());
        let k2 = CompactOpenSet::ball(5, &int(1), 1).unwrap();
        assert!(matches!(corner_list_auto(&k2, &l2), Err(RuleError::NotInvariant | RuleError::NotNormalized)));
    }

    #[test]
    fn finer_subgroup_corner() {
        // K = 1 + p^2 Z_p, L = Z_p: value p^{-2-n}, p(p-1) orbits per sphere
        let p = 3u64;
        let k = CompactOpenSet::ball(p, &int(1), 2).unwrap();
        let l = CompactOpenSet::integers(p).unwrap();
        let list = corner_list(&k, &l, MeasureKind::Mu, MeasureKind::Add);
        // MU(1 + 9Z_3) = 1/3, so the pair is not normalised
        assert!(matches!(list, Err(RuleError::NotNormalized)));
    }

    #[test]
    fn shapes_recognised() {
        assert_eq!(ListRule::corner_units().shape().unwrap(), Shape::Boca(int(1)));
        assert_eq!(ListRule::corner_dual().shape().unwrap(), Shape::Dual);
        assert_eq!(
            ListRule::corner_ls().shape().unwrap(),
            Shape::Tensor(vec![Shape::Boca(int(1)), Shape::Uniform(SizeRule::PrimeMinus(1))])
        );
        let eq = ListRule::Equalized { inner: Box::new(ListRule::corner_dual()) };
        for p in [2u64, 3, 5, 7] {
            assert_eq!(eq.list_at(p).unwrap(), eq.shape().unwrap().list_at(p).unwrap());
        }
    }

    #[test]
    fn numeric_levels_match_exact() {
        let shapes = [
            Shape::Boca(rat(3, 5)),
            Shape::Dual,
            Shape::Tensor(vec![Shape::Boca(int(1)), Shape::Uniform(SizeRule::PrimeMinus(2))]),
            Shape::TruncBoca { beta: int(1), levels: 3 },
            Shape::Tensor(vec![Shape::Powers(rat(1, 2)), Shape::Powers(rat(1, 3))]),
        ];
        for s in &shapes {
            for p in [2u64, 3, 7] {
                let exact = s.list_at(p).unwrap().levels(6);
                let num = s.numeric_levels(p, 6);
                assert_eq!(exact.len(), num.len(), "{s:?} p={p}");
                for (e, (v, m)) in exact.iter().zip(&num) {
                    assert_eq!(e.mult, *m);
                    assert!((e.value.to_f64() - v).abs() <= 1e-12 * v);
                }
            }
        }
    }

    #[test]
    fn profiles_bound_exact_values() {
        // off-top and deficit series must bracket the exact list quantities
        let shapes = [
            Shape::Boca(int(1)),
            Shape::Boca(rat(2, 5)),
            Shape::Dual,
            Shape::Powers(rat(1, 3)),
            Shape::TruncBoca { beta: rat(3, 5), levels: 2 },
            Shape::Tensor(vec![Shape::Boca(int(1)), Shape::Uniform(SizeRule::PrimeMinus(1))]),
            Shape::Tensor(vec![Shape::Boca(int(1)), Shape::Powers(rat(1, 2))]),
        ];
        let index = PrimeSubset::all_primes();
        for s in &shapes {
            let off = s.off_top(&index);
            let def = s.deficit(&index);
            for p in [3u64, 5, 7, 11, 101, 1009] {
                let lv = s.numeric_levels(p, 200);
                let top = lv[0];
                let o = 1.0 - top.0 * top.1 as f64;
                let d = 1.0 - top.0;
                let atoms_o: f64 = off.atoms.iter().map(|a| a.eval(p)).sum();
                let atoms_d: f64 = def.atoms.iter().map(|a| a.eval(p)).sum();
                assert!(o <= off.upper_factor * atoms_o * (1.0 + 1e-9) + 1e-15, "{s:?} p={p}");
                assert!(o >= off.lower_factor * atoms_o * (1.0 - 1e-9) - 1e-15, "{s:?} p={p}");
                assert!(d <= def.upper_factor * atoms_d * (1.0 + 1e-9) + 1e-15, "{s:?} p={p}");
                assert!(d >= def.lower_factor * atoms_d * (1.0 - 1e-9) - 1e-15, "{s:?} p={p}");
            }
        }
    }

    #[test]
    fn json_and_cli_names() {
        let r = ListRule::Truncated { inner: Box::new(ListRule::boca(rat(2, 5))), levels: 3 };
        assert_eq!(ListRule::from_json(&r.to_json()).unwrap(), r);
        let j = serde_json::json!({"kind": "corner", "K": "units", "L": "ball(0,0)"});
        assert_eq!(ListRule::from_json(&j).unwrap(), ListRule::corner_units());
        assert_eq!(ListRule::from_cli_name("uniform:p-2").unwrap(), ListRule::Uniform(SizeRule::PrimeMinus(2)));
        assert!(ListRule::from_cli_name("boca:3/2").is_err());
        assert!(ListRule::from_cli_name("powers:1").is_err());
    }
}
