//! Index sets of primes: finitely many explicit primes followed by a tail
//! family. Tail members are the family's primes larger than every explicit
//! prime, so the two parts never overlap.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_traits::{One, Signed};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::padic::is_prime;
use crate::rational::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubsetError {
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("explicit primes must be distinct")]
    Duplicate,
    #[error("arithmetic progression a mod m needs gcd(a, m) = 1 and m >= 1")]
    DegenerateProgression,
    #[error("polynomial growth degree must be at least 2")]
    DegreeTooSmall,
    #[error("ratio-pair target must lie in (0, 1]")]
    BadRatio,
    #[error("cannot parse subset: {0}")]
    Parse(String),
}

/// Sparse families whose series behaviour is known from their growth.
#[derive(Debug, Clone, PartialEq)]
pub enum GrowthClass {
    /// p_n = least prime >= max(n^d, p_{n-1} + 1); Σ p^{-s} converges for d s > 1.
    Polynomial { degree: u32 },
    /// p_n = least prime >= 2^n, n >= 1.
    Lacunary,
    /// Pairs (q, p) with q = 1 mod 4 prime, q >= q_min, and p = 3 mod 4 the
    /// nearest unused prime with |q/p - lambda| <= lambda * tolerance / 4.
    /// Contains a positive proportion of the primes = 1 mod 4 once the prime
    /// gaps are below the tolerance window, so Σ 1/p diverges.
    RatioPairs { lambda: Rational, tolerance: f64, q_min: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SubsetTail {
    None,
    AllPrimes,
    ArithProg { a: u64, m: u64 },
    Growth(GrowthClass),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimeSubset {
    explicit: Vec<u64>,
    tail: SubsetTail,
}

pub const DEFAULT_RATIO_TOLERANCE: f64 = 1e-3;

impl PrimeSubset {
    pub fn new(mut explicit: Vec<u64>, tail: SubsetTail) -> Result<Self, SubsetError> {
        for &p in &explicit {
            if !is_prime(p) {
                return Err(SubsetError::NotPrime(p));
            }
        }
        explicit.sort_unstable();
        let n = explicit.len();
        explicit.dedup();
        if explicit.len() != n {
            return Err(SubsetError::Duplicate);
        }
        match &tail {
            SubsetTail::ArithProg { a, m } => {
                if *m == 0 || a.gcd(m) != 1 {
                    return Err(SubsetError::DegenerateProgression);
                }
            }
            SubsetTail::Growth(GrowthClass::Polynomial { degree }) if *degree < 2 => {
                return Err(SubsetError::DegreeTooSmall);
            }
            SubsetTail::Growth(GrowthClass::RatioPairs { lambda, tolerance, .. }) => {
                if !lambda.is_positive() || lambda > &Rational::one() || !(*tolerance > 0.0 && *tolerance < 1.0) {
                    return Err(SubsetError::BadRatio);
                }
            }
            _ => {}
        }
        Ok(Self { explicit, tail })
    }

    pub fn explicit(primes: Vec<u64>) -> Result<Self, SubsetError> {
        Self::new(primes, SubsetTail::None)
    }

    pub fn all_primes() -> Self {
        Self { explicit: vec![], tail: SubsetTail::AllPrimes }
    }

    pub fn growth(class: GrowthClass) -> Result<Self, SubsetError> {
        Self::new(vec![], SubsetTail::Growth(class))
    }

    pub fn ratio_pairs(lambda: Rational, q_min: u64) -> Result<Self, SubsetError> {
        Self::growth(GrowthClass::RatioPairs { lambda, tolerance: DEFAULT_RATIO_TOLERANCE, q_min })
    }

    pub fn explicit_primes(&self) -> &[u64] {
        &self.explicit
    }

    pub fn tail(&self) -> &SubsetTail {
        &self.tail
    }

    pub fn is_infinite(&self) -> bool {
        self.tail != SubsetTail::None
    }

    fn floor(&self) -> u64 {
        self.explicit.last().copied().unwrap_or(0)
    }

    /// The first `count` members, explicit primes first. Families that run
    /// out of 64-bit primes (lacunary) may return fewer.
    pub fn primes(&self, count: usize) -> Vec<u64> {
        self.blocks(count).into_iter().flatten().take(count).collect()
    }

    /// Members grouped into blocks: singletons, except ratio pairs which come
    /// as `[q, p]`. Stops once `count` primes have been produced.
    pub fn blocks(&self, count: usize) -> Vec<Vec<u64>> {
        let mut out: Vec<Vec<u64>> = self.explicit.iter().take(count).map(|&p| vec![p]).collect();
        if out.len() >= count {
            return out;
        }
        let floor = self.floor();
        let mut produced = out.len();
        let mut push = |block: Vec<u64>, out: &mut Vec<Vec<u64>>| {
            produced += block.len();
            out.push(block);
            produced >= count
        };
        match &self.tail {
            SubsetTail::None => {}
            SubsetTail::AllPrimes => {
                for p in primal::Primes::all().map(|p| p as u64).filter(|&p| p > floor) {
                    if push(vec![p], &mut out) {
                        break;
                    }
                }
            }
            SubsetTail::ArithProg { a, m } => {
                for p in primal::Primes::all().map(|p| p as u64).filter(|&p| p > floor && p % m == a % m) {
                    if push(vec![p], &mut out) {
                        break;
                    }
                }
            }
            SubsetTail::Growth(GrowthClass::Polynomial { degree }) => {
                let mut prev = 0u64;
                for n in 1u64.. {
                    let Some(target) = n.checked_pow(*degree) else { break };
                    let Some(p) = next_prime(target.max(prev + 1)) else { break };
                    prev = p;
                    if p > floor && push(vec![p], &mut out) {
                        break;
                    }
                }
            }
            SubsetTail::Growth(GrowthClass::Lacunary) => {
                for n in 1..64u32 {
                    let Some(p) = next_prime(1u64 << n) else { break };
                    if p > floor && push(vec![p], &mut out) {
                        break;
                    }
                }
            }
            SubsetTail::Growth(GrowthClass::RatioPairs { lambda, tolerance, q_min }) => {
                let lam = rational::to_f64(lambda);
                let mut used = HashSet::new();
                let start = (*q_min).max(floor + 1).max(5);
                for q in primal::Primes::all().map(|p| p as u64).skip_while(|&q| q < start) {
                    if q % 4 != 1 {
                        continue;
                    }
                    if let Some(p) = ratio_partner(q, lam, *tolerance, &used) {
                        if p <= floor {
                            continue;
                        }
                        used.insert(p);
                        if push(vec![q, p], &mut out) {
                            break;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Json {
        json!({"explicit": self.explicit, "tail": tail_text(&self.tail)})
    }

    pub fn from_json(v: &Json) -> Result<Self, SubsetError> {
        if let Some(s) = v.as_str() {
            return s.parse();
        }
        let bad = || SubsetError::Parse(v.to_string());
        let explicit = match v.get("explicit") {
            None => vec![],
            Some(e) => e
                .as_array()
                .ok_or_else(bad)?
                .iter()
                .map(|x| x.as_u64().ok_or_else(bad))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let tail = match v.get("tail").and_then(Json::as_str) {
            None | Some("none") => SubsetTail::None,
            Some(s) => parse_family(s)?.tail,
        };
        Self::new(explicit, tail)
    }
}

/// Least prime >= n, if one fits in u64.
pub fn next_prime(n: u64) -> Option<u64> {
    let mut k = n.max(2);
    loop {
        if is_prime(k) {
            return Some(k);
        }
        k = k.checked_add(1)?;
    }
}

fn ratio_partner(q: u64, lambda: f64, tolerance: f64, used: &HashSet<u64>) -> Option<u64> {
    let target = q as f64 / lambda;
    let ok = |p: u64| {
        p % 4 == 3 && !used.contains(&p) && is_prime(p) && ((q as f64 / p as f64) / lambda - 1.0).abs() <= tolerance / 4.0
    };
    let center = target.round() as u64;
    let reach = (target * tolerance / 4.0).ceil() as u64 + 1;
    for d in 0..=reach {
        if ok(center + d) {
            return Some(center + d);
        }
        if d <= center && ok(center - d) {
            return Some(center - d);
        }
    }
    None
}

fn tail_text(t: &SubsetTail) -> String {
    match t {
        SubsetTail::None => "none".into(),
        SubsetTail::AllPrimes => "all_primes".into(),
        SubsetTail::ArithProg { a, m } => format!("ap:{a}:{m}"),
        SubsetTail::Growth(GrowthClass::Polynomial { degree }) => format!("poly:{degree}"),
        SubsetTail::Growth(GrowthClass::Lacunary) => "lacunary".into(),
        SubsetTail::Growth(GrowthClass::RatioPairs { lambda, tolerance, q_min }) => {
            format!("ratio_pairs:{}:{}:{}", rational::format_rational(lambda), q_min, tolerance)
        }
    }
}

fn parse_family(s: &str) -> Result<PrimeSubset, SubsetError> {
    let bad = || SubsetError::Parse(s.to_string());
    let parts: Vec<&str> = s.trim().split(':').collect();
    let num = |x: &str| x.trim().parse::<u64>().map_err(|_| bad());
    match parts.as_slice() {
        ["all_primes"] => Ok(PrimeSubset::all_primes()),
        ["none"] => PrimeSubset::explicit(vec![]),
        ["explicit", list] => {
            let primes = list
                .split(',')
                .filter(|x| !x.trim().is_empty())
                .map(num)
                .collect::<Result<Vec<_>, _>>()?;
            PrimeSubset::explicit(primes)
        }
        ["ap", a, m] => PrimeSubset::new(vec![], SubsetTail::ArithProg { a: num(a)?, m: num(m)? }),
        ["poly", d] => PrimeSubset::growth(GrowthClass::Polynomial { degree: num(d)? as u32 }),
        ["squares"] => PrimeSubset::growth(GrowthClass::Polynomial { degree: 2 }),
        ["lacunary"] => PrimeSubset::growth(GrowthClass::Lacunary),
        ["ratio_pairs", rest @ ..] if !rest.is_empty() && rest.len() <= 3 => {
            let lambda = rational::parse_rational(rest[0]).ok_or_else(bad)?;
            let q_min = rest.get(1).map(|x| num(x)).transpose()?.unwrap_or(5);
            let tolerance = match rest.get(2) {
                Some(t) => t.trim().parse::<f64>().map_err(|_| bad())?,
                None => DEFAULT_RATIO_TOLERANCE,
            };
            PrimeSubset::growth(GrowthClass::RatioPairs { lambda, tolerance, q_min })
        }
        _ => Err(bad()),
    }
}

impl FromStr for PrimeSubset {
    type Err = SubsetError;

    /// Family descriptors: `all_primes`, `explicit:2,3,5`, `ap:a:m`, `poly:d`,
    /// `squares`, `lacunary`, `ratio_pairs:lambda[:q_min[:tolerance]]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_family(s)
    }
}

impl fmt::Display for PrimeSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.explicit.is_empty() {
            return f.write_str(&tail_text(&self.tail));
        }
        let list: Vec<String> = self.explicit.iter().map(u64::to_string).collect();
        match self.tail {
            SubsetTail::None => write!(f, "explicit:{}", list.join(",")),
            _ => write!(f, "explicit:{}+{}", list.join(","), tail_text(&self.tail)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_enumerate() {
        assert_eq!(PrimeSubset::all_primes().primes(5), vec![2, 3, 5, 7, 11]);
        let s: PrimeSubset = "squares".parse().unwrap();
        // 1 -> 2, 4 -> 5, 9 -> 11, 16 -> 17, 25 -> 29
        assert_eq!(s.primes(5), vec![2, 5, 11, 17, 29]);
        let l: PrimeSubset = "lacunary".parse().unwrap();
        assert_eq!(l.primes(5), vec![2, 5, 11, 17, 37]);
        assert_eq!(l.primes(1000).len(), 63);
        let ap: PrimeSubset = "ap:1:4".parse().unwrap();
        assert_eq!(ap.primes(4), vec![5, 13, 17, 29]);
    }

    #[test]
    fn explicit_then_tail() {
        let s = PrimeSubset::new(vec![5, 2, 3], SubsetTail::AllPrimes).unwrap();
        assert_eq!(s.primes(6), vec![2, 3, 5, 7, 11, 13]);
        let j = s.to_json();
        assert_eq!(PrimeSubset::from_json(&j).unwrap(), s);
        let from_spec: PrimeSubset =
            PrimeSubset::from_json(&json!({"explicit": [2, 3, 5], "tail": "all_primes"})).unwrap();
        assert_eq!(from_spec, s);
    }

    #[test]
    fn validation() {
        assert_eq!(PrimeSubset::explicit(vec![4]).unwrap_err(), SubsetError::NotPrime(4));
        assert_eq!(PrimeSubset::explicit(vec![3, 3]).unwrap_err(), SubsetError::Duplicate);
        assert!("ap:2:4".parse::<PrimeSubset>().is_err());
        assert!("poly:1".parse::<PrimeSubset>().is_err());
        assert!("ratio_pairs:3/2".parse::<PrimeSubset>().is_err());
        assert!("bogus".parse::<PrimeSubset>().is_err());
    }

    #[test]
    fn ratio_pairs_hit_the_target() {
        let s: PrimeSubset = "ratio_pairs:1/2:1000".parse().unwrap();
        let blocks = s.blocks(200);
        assert!(blocks.len() >= 90);
        for b in &blocks {
            let (q, p) = (b[0] as f64, b[1] as f64);
            assert_eq!(b[0] % 4, 1);
            assert_eq!(b[1] % 4, 3);
            assert!(((q / p) / 0.5 - 1.0).abs() <= 2.5e-4);
        }
        let ps: HashSet<u64> = blocks.iter().map(|b| b[1]).collect();
        assert_eq!(ps.len(), blocks.len());
    }
}
