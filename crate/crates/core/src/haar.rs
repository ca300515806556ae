//! Compact open subsets of Q_p and their Haar measures.
//!
//! Sets are kept in a canonical form: a finite disjoint union of balls
//! `c + p^k Z_p`, with every complete family of `p` sibling balls merged into
//! its parent. Two sets are equal iff their canonical ball lists are equal.
//!
//! Four normalisations of Haar measure are supported (see [`MeasureKind`]):
//!
//! * `ADD`  additive, `Z_p -> 1`
//! * `NU`   additive, `Z_p* -> 1`, so `NU = ADD / (1 - 1/p)`
//! * `MULT` multiplicative, `Z_p* -> 1`
//! * `MU`   multiplicative, `1 + pZ_p -> 1`, so `MU = (p - 1) MULT`
//!
//! On a sphere `p^n Z_p*` the densities are related by
//! `d ADD = (1 - 1/p) |x|_p d MULT`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::padic::{is_prime, PadicNumber};
use crate::rational::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HaarError {
    #[error("multiplicative measure of a set containing 0 diverges")]
    UnboundedSet,
    #[error("set is not invariant under the subgroup (KL != L)")]
    NotInvariant,
    #[error("conversion between additive and multiplicative measures needs a set inside one sphere")]
    MixedSphere,
    #[error("ball resolution p^{0} is too fine to represent")]
    ResolutionTooFine(i64),
    #[error("residue enumeration of size {0} exceeds the configured limit")]
    EnumerationTooLarge(u128),
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("cannot parse set expression: {0}")]
    Parse(String),
}

/// Haar measure normalisations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MeasureKind {
    Add,
    Mult,
    Mu,
    Nu,
}

impl MeasureKind {
    fn is_additive(self) -> bool {
        matches!(self, MeasureKind::Add | MeasureKind::Nu)
    }
}

impl FromStr for MeasureKind {
    type Err = HaarError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "add" => Ok(MeasureKind::Add),
            "mult" => Ok(MeasureKind::Mult),
            "mu" => Ok(MeasureKind::Mu),
            "nu" => Ok(MeasureKind::Nu),
            _ => Err(HaarError::Parse(format!("unknown measure kind {s}"))),
        }
    }
}

/// Finite-index subgroups of Z_p* acting on subsets of Z_p by multiplication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitSubgroup {
    /// Z_p*
    Units,
    /// 1 + p^k Z_p, k >= 1
    OnePlus(u32),
}

impl UnitSubgroup {
    /// k such that the subgroup is 1 + p^k Z_p (0 for Z_p*).
    pub fn level(self) -> u32 {
        match self {
            UnitSubgroup::Units => 0,
            UnitSubgroup::OnePlus(k) => k,
        }
    }

    pub fn as_set(self, prime: u64) -> Result<CompactOpenSet, HaarError> {
        match self {
            UnitSubgroup::Units => CompactOpenSet::units(prime),
            UnitSubgroup::OnePlus(k) => CompactOpenSet::ball(prime, &rational::int(1), k as i64),
        }
    }
}

/// Upper bound on the number of residues `coset_count` will enumerate.
pub const ENUMERATION_LIMIT: u128 = 50_000_000;

/// The ball `residue / p^shift + p^level Z_p`, canonically represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Ball {
    level: i64,
    shift: u32,
    residue: u128,
}

fn pow_u128(p: u64, e: i64) -> Option<u128> {
    if e < 0 {
        return None;
    }
    (p as u128).checked_pow(e as u32)
}

impl Ball {
    fn new(prime: u64, center: &Rational, level: i64) -> Result<Self, HaarError> {
        let v = rational::valuation(center, prime);
        match v {
            None => return Ok(Ball { level, shift: 0, residue: 0 }),
            Some(v) if v >= level => return Ok(Ball { level, shift: 0, residue: 0 }),
            Some(v) => {
                let shift = (-v).max(0);
                let width = level + shift;
                let modulus = pow_u128(prime, width).ok_or(HaarError::ResolutionTooFine(level))?;
                let scaled = center * rational::prime_pow(prime, shift);
                let r = rational::residue_mod(&scaled, &BigInt::from(modulus))
                    .expect("scaled center is a p-adic integer");
                Ok(Ball {
                    level,
                    shift: shift as u32,
                    residue: r.to_u128().unwrap(),
                })
            }
        }
    }

    fn center(&self, prime: u64) -> Rational {
        BigRational::from_integer(BigInt::from(self.residue)) * rational::prime_pow(prime, -(self.shift as i64))
    }

    fn contains_zero(&self) -> bool {
        self.residue == 0
    }

    /// Valuation of every element of the ball, when it avoids 0.
    fn sphere(&self, prime: u64) -> Option<i64> {
        if self.contains_zero() {
            return None;
        }
        let (_, v) = rational::strip_prime(&BigInt::from(self.residue), prime);
        Some(v - self.shift as i64)
    }

    /// The unique ball of level `level <= self.level` containing this one.
    fn ancestor(&self, prime: u64, level: i64) -> Ball {
        debug_assert!(level <= self.level);
        if self.shift == 0 {
            if level <= 0 {
                return Ball { level, shift: 0, residue: 0 };
            }
            let m = pow_u128(prime, level).unwrap();
            return Ball { level, shift: 0, residue: self.residue % m };
        }
        // center has valuation -shift < 0
        if level <= -(self.shift as i64) {
            return Ball { level, shift: 0, residue: 0 };
        }
        let m = pow_u128(prime, level + self.shift as i64).unwrap();
        Ball { level, shift: self.shift, residue: self.residue % m }
    }

    fn measure_add(&self, prime: u64) -> Rational {
        rational::prime_pow(prime, -self.level)
    }
}

/// A compact open subset of Q_p in canonical ball form.
#[derive(Clone)]
pub struct CompactOpenSet {
    prime: u64,
    balls: Vec<Ball>,
    index: BTreeMap<(i64, u32), HashSet<u128>>,
}

impl PartialEq for CompactOpenSet {
    fn eq(&self, other: &Self) -> bool {
        self.prime == other.prime && self.balls == other.balls
    }
}

impl fmt::Debug for CompactOpenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .balls
            .iter()
            .map(|b| format!("ball({}, {})", rational::format_rational(&b.center(self.prime)), b.level))
            .collect();
        write!(f, "CompactOpenSet[p={}; {}]", self.prime, parts.join(" u "))
    }
}

impl CompactOpenSet {
    fn from_balls(prime: u64, balls: Vec<Ball>) -> Self {
        let balls = normalize(prime, balls);
        let mut index: BTreeMap<(i64, u32), HashSet<u128>> = BTreeMap::new();
        for b in &balls {
            index.entry((b.level, b.shift)).or_default().insert(b.residue);
        }
        Self { prime, balls, index }
    }

    fn check_prime(prime: u64) -> Result<(), HaarError> {
        if is_prime(prime) {
            Ok(())
        } else {
            Err(HaarError::NotPrime(prime))
        }
    }

    pub fn empty(prime: u64) -> Result<Self, HaarError> {
        Self::check_prime(prime)?;
        Ok(Self::from_balls(prime, Vec::new()))
    }

    /// `center + p^level Z_p`
    pub fn ball(prime: u64, center: &Rational, level: i64) -> Result<Self, HaarError> {
        Self::check_prime(prime)?;
        Ok(Self::from_balls(prime, vec![Ball::new(prime, center, level)?]))
    }

    pub fn integers(prime: u64) -> Result<Self, HaarError> {
        Self::ball(prime, &rational::int(0), 0)
    }

    /// `p^n Z_p*`
    pub fn sphere(prime: u64, n: i64) -> Result<Self, HaarError> {
        Self::check_prime(prime)?;
        let mut balls = Vec::with_capacity(prime as usize - 1);
        let scale = rational::prime_pow(prime, n);
        for r in 1..prime {
            let c = BigRational::from_integer(BigInt::from(r)) * &scale;
            balls.push(Ball::new(prime, &c, n + 1)?);
        }
        Ok(Self::from_balls(prime, balls))
    }

    pub fn units(prime: u64) -> Result<Self, HaarError> {
        Self::sphere(prime, 0)
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn ball_count(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// Canonical balls as (center, level) pairs.
    pub fn balls(&self) -> Vec<(Rational, i64)> {
        self.balls.iter().map(|b| (b.center(self.prime), b.level)).collect()
    }

    /// Finest level appearing in the canonical form.
    pub fn resolution(&self) -> Option<i64> {
        self.balls.iter().map(|b| b.level).max()
    }

    pub fn contains_zero(&self) -> bool {
        self.balls.iter().any(Ball::contains_zero)
    }

    pub fn is_subset_of_integers(&self) -> bool {
        self.balls.iter().all(|b| b.level >= 0 && b.shift == 0)
    }

    fn contains_ball(&self, b: &Ball) -> bool {
        self.index.iter().any(|(&(level, shift), residues)| {
            level <= b.level && {
                let a = b.ancestor(self.prime, level);
                a.shift == shift && residues.contains(&a.residue)
            }
        })
    }

    pub fn contains_rational(&self, x: &Rational) -> bool {
        if x.is_zero() {
            return self.contains_zero();
        }
        self.index.iter().any(|(&(level, shift), residues)| {
            match Ball::new(self.prime, x, level) {
                Ok(a) => a.shift == shift && residues.contains(&a.residue),
                Err(_) => false,
            }
        })
    }

    /// Membership of a p-adic number, decided from its guaranteed digits.
    pub fn contains(&self, x: &PadicNumber) -> bool {
        x.prime() == self.prime && self.contains_rational(&x.to_rational())
    }

    /// Fast membership for the integer `x`, given as a residue modulo a power
    /// of p at least as fine as the set's resolution.
    fn contains_integer(&self, x: u128) -> bool {
        self.index.iter().any(|(&(level, shift), residues)| {
            if shift != 0 {
                return false;
            }
            if level <= 0 {
                return true;
            }
            let m = pow_u128(self.prime, level).unwrap();
            residues.contains(&(x % m))
        })
    }

    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.prime, other.prime);
        let mut balls = self.balls.clone();
        balls.extend_from_slice(&other.balls);
        Self::from_balls(self.prime, balls)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        assert_eq!(self.prime, other.prime);
        // balls are nested or disjoint, so the intersection consists of the
        // balls of either side lying inside the other side
        let mut balls: Vec<Ball> = self.balls.iter().filter(|b| other.contains_ball(b)).copied().collect();
        balls.extend(other.balls.iter().filter(|b| self.contains_ball(b)));
        Self::from_balls(self.prime, balls)
    }

    pub fn translate(&self, t: &Rational) -> Result<Self, HaarError> {
        let balls = self
            .balls
            .iter()
            .map(|b| Ball::new(self.prime, &(b.center(self.prime) + t), b.level))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_balls(self.prime, balls))
    }

    /// Image under multiplication by a nonzero rational.
    pub fn scale(&self, x: &Rational) -> Result<Self, HaarError> {
        let v = rational::valuation(x, self.prime).expect("nonzero scale factor");
        let balls = self
            .balls
            .iter()
            .map(|b| Ball::new(self.prime, &(b.center(self.prime) * x), b.level + v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_balls(self.prime, balls))
    }

    pub fn measure(&self, kind: MeasureKind) -> Result<Rational, HaarError> {
        let p = self.prime;
        let one_minus = rational::int(1) - rational::rat(1, p as i64);
        match kind {
            MeasureKind::Add => Ok(self.balls.iter().map(|b| b.measure_add(p)).sum()),
            MeasureKind::Nu => Ok(self.measure(MeasureKind::Add)? / one_minus),
            MeasureKind::Mult => {
                let mut total = BigRational::zero();
                for b in &self.balls {
                    let n = b.sphere(p).ok_or(HaarError::UnboundedSet)?;
                    total += b.measure_add(p) * rational::prime_pow(p, n) / &one_minus;
                }
                Ok(total)
            }
            MeasureKind::Mu => Ok(self.measure(MeasureKind::Mult)? * rational::int(p as i64 - 1)),
        }
    }

    /// The sphere index n when the whole set lies in `p^n Z_p*`.
    pub fn single_sphere(&self) -> Option<i64> {
        let mut spheres = self.balls.iter().map(|b| b.sphere(self.prime));
        let first = spheres.next()??;
        spheres.all(|s| s == Some(first)).then_some(first)
    }

    /// Whether `K * self == self`.
    pub fn is_invariant(&self, group: UnitSubgroup) -> bool {
        let p = self.prime;
        match group {
            UnitSubgroup::OnePlus(k) => self
                .balls
                .iter()
                .all(|b| b.sphere(p).map_or(true, |m| b.level <= m + k as i64)),
            UnitSubgroup::Units => {
                let mut per_sphere: HashMap<i64, Rational> = HashMap::new();
                for b in &self.balls {
                    if let Some(m) = b.sphere(p) {
                        *per_sphere.entry(m).or_insert_with(BigRational::zero) += b.measure_add(p);
                    }
                }
                let one_minus = rational::int(1) - rational::rat(1, p as i64);
                per_sphere
                    .into_iter()
                    .all(|(m, mass)| mass == rational::prime_pow(p, -m) * &one_minus)
            }
        }
    }

    /// Number of K-orbits in `self ∩ p^n Z_p*`, by enumerating unit residues
    /// `u mod p^R` and sorting `p^n u` into orbits.
    pub fn coset_count(&self, n: u32, group: UnitSubgroup) -> Result<u64, HaarError> {
        if !self.is_invariant(group) {
            return Err(HaarError::NotInvariant);
        }
        let p = self.prime;
        let k = group.level() as i64;
        let fine = self.resolution().unwrap_or(0) - n as i64;
        let r = (k + 1).max(fine).max(1);
        let size = pow_u128(p, r).ok_or(HaarError::ResolutionTooFine(r))?;
        if size > ENUMERATION_LIMIT {
            return Err(HaarError::EnumerationTooLarge(size));
        }
        let pn = pow_u128(p, n as i64).ok_or(HaarError::ResolutionTooFine(n as i64))?;
        let orbit_mod = pow_u128(p, k).unwrap();
        let mut orbits = HashSet::new();
        for u in 1..size {
            if u % p as u128 == 0 {
                continue;
            }
            let x = match pn.checked_mul(u) {
                Some(x) => x,
                None => return Err(HaarError::ResolutionTooFine(n as i64 + r)),
            };
            if self.contains_integer(x) {
                orbits.insert(u % orbit_mod);
            }
        }
        Ok(orbits.len() as u64)
    }
}

/// Canonical form: drop balls inside other balls, then merge complete sibling
/// families bottom-up.
fn normalize(prime: u64, mut balls: Vec<Ball>) -> Vec<Ball> {
    balls.sort();
    balls.dedup();
    let mut by_level: BTreeMap<i64, HashSet<Ball>> = BTreeMap::new();
    for b in balls {
        let covered = by_level
            .iter()
            .take_while(|(&l, _)| l <= b.level)
            .any(|(&l, set)| set.contains(&b.ancestor(prime, l)));
        if !covered {
            by_level.entry(b.level).or_default().insert(b);
        }
    }
    loop {
        let mut merged_any = false;
        let levels: Vec<i64> = by_level.keys().rev().copied().collect();
        for level in levels {
            let Some(set) = by_level.get(&level) else { continue };
            let mut families: HashMap<Ball, Vec<Ball>> = HashMap::new();
            for b in set {
                families.entry(b.ancestor(prime, level - 1)).or_default().push(*b);
            }
            let full: Vec<(Ball, Vec<Ball>)> = families
                .into_iter()
                .filter(|(_, kids)| kids.len() as u64 == prime)
                .collect();
            if full.is_empty() {
                continue;
            }
            merged_any = true;
            for (parent, kids) in full {
                let set = by_level.get_mut(&level).unwrap();
                for kid in kids {
                    set.remove(&kid);
                }
                by_level.entry(level - 1).or_default().insert(parent);
            }
        }
        if !merged_any {
            break;
        }
    }
    let mut out: Vec<Ball> = by_level.into_values().flatten().collect();
    out.sort();
    out
}

/// Converts a measure value on `on` between normalisations.
pub fn convert(
    value: &Rational,
    from: MeasureKind,
    to: MeasureKind,
    on: &CompactOpenSet,
) -> Result<Rational, HaarError> {
    let p = on.prime();
    let one_minus = rational::int(1) - rational::rat(1, p as i64);
    let pm1 = rational::int(p as i64 - 1);
    // express everything in ADD or MULT first
    let base = match from {
        MeasureKind::Add | MeasureKind::Mult => value.clone(),
        MeasureKind::Nu => value * &one_minus,
        MeasureKind::Mu => value / &pm1,
    };
    let base_kind = if from.is_additive() { MeasureKind::Add } else { MeasureKind::Mult };
    let target_base = if to.is_additive() { MeasureKind::Add } else { MeasureKind::Mult };
    let moved = if base_kind == target_base {
        base
    } else {
        let n = on.single_sphere().ok_or(HaarError::MixedSphere)?;
        let density = &one_minus * rational::prime_pow(p, -n);
        if base_kind == MeasureKind::Mult {
            base * density
        } else {
            base / density
        }
    };
    Ok(match to {
        MeasureKind::Add | MeasureKind::Mult => moved,
        MeasureKind::Nu => moved / one_minus,
        MeasureKind::Mu => moved * pm1,
    })
}

/// Prime-independent description of a compact open set, in the textual
/// grammar `ball(c, k)`, `sphere(n)`, `units`, `one_plus_p`, `one_plus_p(k)`,
/// `translate(S, t)`, `union(S1, S2)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SetExpr {
    Ball(Rational, i64),
    Sphere(i64),
    Units,
    OnePlusP(u32),
    Translate(Box<SetExpr>, Rational),
    Union(Box<SetExpr>, Box<SetExpr>),
}

impl SetExpr {
    pub fn integers() -> Self {
        SetExpr::Ball(rational::int(0), 0)
    }

    pub fn units_minus_one() -> Self {
        SetExpr::Translate(Box::new(SetExpr::Units), rational::int(-1))
    }

    pub fn instantiate(&self, prime: u64) -> Result<CompactOpenSet, HaarError> {
        match self {
            SetExpr::Ball(c, k) => CompactOpenSet::ball(prime, c, *k),
            SetExpr::Sphere(n) => CompactOpenSet::sphere(prime, *n),
            SetExpr::Units => CompactOpenSet::units(prime),
            SetExpr::OnePlusP(k) => CompactOpenSet::ball(prime, &rational::int(1), *k as i64),
            SetExpr::Translate(s, t) => s.instantiate(prime)?.translate(t),
            SetExpr::Union(a, b) => Ok(a.instantiate(prime)?.union(&b.instantiate(prime)?)),
        }
    }

    /// The subgroup this expression names, if it is `units` or `one_plus_p(k)`.
    pub fn as_subgroup(&self) -> Option<UnitSubgroup> {
        match self {
            SetExpr::Units | SetExpr::Sphere(0) => Some(UnitSubgroup::Units),
            SetExpr::OnePlusP(k) if *k >= 1 => Some(UnitSubgroup::OnePlus(*k)),
            SetExpr::Ball(c, k) if *c == rational::int(1) && *k >= 1 => Some(UnitSubgroup::OnePlus(*k as u32)),
            _ => None,
        }
    }
}

impl fmt::Display for SetExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetExpr::Ball(c, k) => write!(f, "ball({}, {})", rational::format_rational(c), k),
            SetExpr::Sphere(n) => write!(f, "sphere({n})"),
            SetExpr::Units => write!(f, "units"),
            SetExpr::OnePlusP(1) => write!(f, "one_plus_p"),
            SetExpr::OnePlusP(k) => write!(f, "one_plus_p({k})"),
            SetExpr::Translate(s, t) => write!(f, "translate({}, {})", s, rational::format_rational(t)),
            SetExpr::Union(a, b) => write!(f, "union({a}, {b})"),
        }
    }
}

impl FromStr for SetExpr {
    type Err = HaarError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parser = Parser { src: s, pos: 0 };
        let e = parser.expr()?;
        parser.skip_ws();
        if parser.pos != s.len() {
            return Err(parser.error("trailing input"));
        }
        Ok(e)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, what: &str) -> HaarError {
        HaarError::Parse(format!("{what} at offset {} in {:?}", self.pos, self.src))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> Result<(), HaarError> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn peek_is(&mut self, c: char) -> bool {
        self.skip_ws();
        self.src[self.pos..].starts_with(c)
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(rest.len());
        self.pos += len;
        rest[..len].to_string()
    }

    fn number(&mut self) -> Result<Rational, HaarError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_digit() || c == '-' || c == '+' || c == '/' || c == '.'))
            .unwrap_or(rest.len());
        let tok = &rest[..len];
        let r = rational::parse_rational(tok).ok_or_else(|| self.error("expected a rational"))?;
        self.pos += len;
        Ok(r)
    }

    fn integer(&mut self) -> Result<i64, HaarError> {
        let r = self.number()?;
        if !r.is_integer() {
            return Err(self.error("expected an integer"));
        }
        r.to_integer().to_i64().ok_or_else(|| self.error("integer out of range"))
    }

    fn expr(&mut self) -> Result<SetExpr, HaarError> {
        let name = self.ident();
        match name.as_str() {
            "units" => Ok(SetExpr::Units),
            "one_plus_p" => {
                if self.peek_is('(') {
                    self.eat('(')?;
                    let k = self.integer()?;
                    self.eat(')')?;
                    if k < 1 {
                        return Err(self.error("one_plus_p level must be >= 1"));
                    }
                    Ok(SetExpr::OnePlusP(k as u32))
                } else {
                    Ok(SetExpr::OnePlusP(1))
                }
            }
            "ball" => {
                self.eat('(')?;
                let c = self.number()?;
                self.eat(',')?;
                let k = self.integer()?;
                self.eat(')')?;
                Ok(SetExpr::Ball(c, k))
            }
            "sphere" => {
                self.eat('(')?;
                let n = self.integer()?;
                self.eat(')')?;
                Ok(SetExpr::Sphere(n))
            }
            "translate" => {
                self.eat('(')?;
                let s = self.expr()?;
                self.eat(',')?;
                let t = self.number()?;
                self.eat(')')?;
                Ok(SetExpr::Translate(Box::new(s), t))
            }
            "union" => {
                self.eat('(')?;
                let a = self.expr()?;
                self.eat(',')?;
                let b = self.expr()?;
                self.eat(')')?;
                Ok(SetExpr::Union(Box::new(a), Box::new(b)))
            }
            "" => Err(self.error("expected a set expression")),
            other => Err(self.error(&format!("unknown set constructor {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn units(p: u64) -> CompactOpenSet {
        CompactOpenSet::units(p).unwrap()
    }

    fn zp(p: u64) -> CompactOpenSet {
        CompactOpenSet::integers(p).unwrap()
    }

    fn one_plus(p: u64) -> CompactOpenSet {
        CompactOpenSet::ball(p, &int(1), 1).unwrap()
    }

    #[test]
    fn measure_relations() {
        for p in [2u64, 3, 5, 7] {
            let pi = p as i64;
            assert_eq!(units(p).measure(MeasureKind::Add).unwrap(), int(1) - rat(1, pi));
            assert_eq!(one_plus(p).measure(MeasureKind::Mu).unwrap(), int(1));
            assert_eq!(units(p).measure(MeasureKind::Mu).unwrap(), int(pi - 1));
            assert_eq!(units(p).measure(MeasureKind::Mult).unwrap(), int(1));
            assert_eq!(units(p).measure(MeasureKind::Nu).unwrap(), int(1));
        }
    }

    #[test]
    fn ball_measure_matches_residue_counting() {
        // oracle: fraction of residues mod p^m lying in p^n Z_p
        for p in [2u64, 3, 5] {
            for n in 0..3i64 {
                let m = n + 2;
                let pm = p.pow(m as u32);
                let hits = (0..pm).filter(|x| x % p.pow(n as u32) == 0).count() as i64;
                let s = CompactOpenSet::ball(p, &int(0), n).unwrap();
                assert_eq!(s.measure(MeasureKind::Add).unwrap(), rat(hits, pm as i64));
            }
        }
    }

    #[test]
    fn units_contain_zero_errors() {
        assert_eq!(zp(3).measure(MeasureKind::Mult).unwrap_err(), HaarError::UnboundedSet);
    }

    #[test]
    fn normal_form_merges_siblings() {
        let p = 3;
        let u = units(p);
        let pz = CompactOpenSet::ball(p, &int(0), 1).unwrap();
        assert_eq!(u.union(&pz), zp(p));
        // idempotent
        assert_eq!(zp(p).union(&zp(p)), zp(p));
        assert_eq!(u.ball_count(), 2);
    }

    #[test]
    fn translate_units_minus_one() {
        let p = 5;
        let l = units(p).translate(&int(-1)).unwrap();
        assert!(l.contains_rational(&int(0)));
        assert!(!l.contains_rational(&int(-1)));
        assert!(!l.contains_rational(&int(4)));
        assert!(l.contains_rational(&int(3)));
        assert_eq!(l.measure(MeasureKind::Nu).unwrap(), int(1));
        assert!(l.is_invariant(UnitSubgroup::OnePlus(1)));
        assert!(!l.is_invariant(UnitSubgroup::Units));
    }

    #[test]
    fn dual_corner_coset_counts() {
        for p in [2u64, 3, 5, 7, 11] {
            let l = units(p).translate(&int(-1)).unwrap();
            assert_eq!(l.coset_count(0, UnitSubgroup::OnePlus(1)).unwrap(), p - 2);
            for n in 1..4 {
                assert_eq!(l.coset_count(n, UnitSubgroup::OnePlus(1)).unwrap(), p - 1);
            }
            for n in 0..4 {
                assert_eq!(zp(p).coset_count(n, UnitSubgroup::Units).unwrap(), 1);
                assert_eq!(zp(p).coset_count(n, UnitSubgroup::OnePlus(1)).unwrap(), p - 1);
            }
        }
    }

    #[test]
    fn coset_count_requires_invariance() {
        let l = CompactOpenSet::ball(5, &int(1), 2).unwrap();
        assert_eq!(
            l.coset_count(0, UnitSubgroup::OnePlus(1)).unwrap_err(),
            HaarError::NotInvariant
        );
    }

    #[test]
    fn conversions() {
        let p = 5;
        let u = units(p);
        assert_eq!(
            convert(&int(1), MeasureKind::Mult, MeasureKind::Add, &u).unwrap(),
            int(1) - rat(1, 5)
        );
        assert_eq!(convert(&rat(3, 7), MeasureKind::Nu, MeasureKind::Nu, &u).unwrap(), rat(3, 7));
        let s1 = CompactOpenSet::sphere(p, 1).unwrap();
        // residue oracle: p*Z_p* has additive measure (p-1)/p^2
        assert_eq!(
            convert(&int(1), MeasureKind::Mult, MeasureKind::Add, &s1).unwrap(),
            rat(4, 25)
        );
        assert_eq!(s1.measure(MeasureKind::Add).unwrap(), rat(4, 25));
        assert_eq!(
            convert(&int(1), MeasureKind::Mult, MeasureKind::Add, &zp(p)).unwrap_err(),
            HaarError::MixedSphere
        );
        // MU -> NU on Z_p*: MU(Z_p*) = p-1 maps to NU(Z_p*) = 1
        assert_eq!(convert(&int(4), MeasureKind::Mu, MeasureKind::Nu, &u).unwrap(), int(1));
    }

    #[test]
    fn grammar_round_trip() {
        for s in [
            "ball(0, 0)",
            "units",
            "one_plus_p",
            "one_plus_p(2)",
            "sphere(3)",
            "translate(units, -1)",
            "union(ball(1/3, 2), sphere(-1))",
        ] {
            let e: SetExpr = s.parse().unwrap();
            assert_eq!(e.to_string(), s);
        }
        assert!("ball(0)".parse::<SetExpr>().is_err());
        assert!("spheres(1)".parse::<SetExpr>().is_err());
        assert!("units extra".parse::<SetExpr>().is_err());
    }

    #[test]
    fn negative_levels_and_rational_centers() {
        let p = 3;
        let s = CompactOpenSet::ball(p, &rat(1, 3), 0).unwrap();
        assert!(s.contains_rational(&rat(4, 3)));
        assert!(!s.contains_rational(&rat(2, 3)));
        assert_eq!(s.measure(MeasureKind::Add).unwrap(), int(1));
        assert_eq!(s.single_sphere(), Some(-1));
        let big = CompactOpenSet::ball(p, &int(0), -1).unwrap();
        assert_eq!(big.intersect(&s), s);
        assert_eq!(big.measure(MeasureKind::Add).unwrap(), int(3));
    }
}
