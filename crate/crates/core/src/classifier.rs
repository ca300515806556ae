//! Type classification of ITPFI factors.
//!
//! Decision tree: the type III series `Σ_n Σ_i λ_{n,i} min(|λ_{n,1}/λ_{n,i} - 1|², C)`
//! decides III against semifinite. In the semifinite case the type I test
//! `Σ_n (1 - λ_{n,1})` decides whether the corner onto the product of top
//! eigenvectors is nonzero; that corner is one-dimensional, so convergence
//! gives type I. Everything else is type II.
//!
//! The III series is bounded by the off-top mass `o_n = 1 - m_{n,1} λ_{n,1}`:
//! every off-top eigenvalue satisfies `λ_{n,1}/λ_{n,i} >= gap`, so each term
//! lies between `min((gap-1)², C) o_n` and `C o_n`. Uniform tensor factors add
//! nothing to the series and are excluded from the top-eigenvalue check.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Signed};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::rational::{self, Rational};
use crate::rules::{RuleError, Shape};
use crate::series::{decide, PrimeSeries, Verdict};
use crate::spec::{Certificate, ItpfiSpec, SpecError, Truncation};

#[derive(Debug, Error, Clone)]
pub enum ClassifyError {
    #[error("top eigenvalue bound {top} is below delta_min = {required}")]
    DeltaViolated { top: f64, required: f64 },
    #[error("tensor_type of an indeterminate type")]
    IndeterminateInput,
    #[error("invalid classifier parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

impl ClassifyError {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifyError::DeltaViolated { .. } => "DeltaViolated",
            ClassifyError::IndeterminateInput => "IndeterminateInput",
            ClassifyError::InvalidParams(_) => "InvalidParams",
            ClassifyError::Spec(e) => e.name(),
        }
    }
}

impl From<crate::series::SeriesError> for ClassifyError {
    fn from(e: crate::series::SeriesError) -> Self {
        ClassifyError::Spec(SpecError::Series(e))
    }
}

impl From<RuleError> for ClassifyError {
    fn from(e: RuleError) -> Self {
        ClassifyError::Spec(SpecError::Rule(e))
    }
}

type Result<T> = std::result::Result<T, ClassifyError>;

#[derive(Debug, Clone, PartialEq)]
pub enum Subtype {
    Lambda { estimate: f64, tolerance: f64, heuristic: bool },
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorType {
    IFinite(BigUint),
    IInf,
    II1,
    IIInf,
    III(Subtype),
    Indeterminate(String),
}

impl FactorType {
    /// Name without parameters: `I_FINITE`, `I_INF`, `II_1`, `II_INF`, `III`, `INDETERMINATE`.
    pub fn name(&self) -> &'static str {
        match self {
            FactorType::IFinite(_) => "I_FINITE",
            FactorType::IInf => "I_INF",
            FactorType::II1 => "II_1",
            FactorType::IIInf => "II_INF",
            FactorType::III(_) => "III",
            FactorType::Indeterminate(_) => "INDETERMINATE",
        }
    }

    pub fn is_three(&self) -> bool {
        matches!(self, FactorType::III(_))
    }

    pub fn is_determinate(&self) -> bool {
        !matches!(self, FactorType::Indeterminate(_))
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            FactorType::III(Subtype::Lambda { estimate, .. }) => Some(*estimate),
            _ => None,
        }
    }

    /// Same type ignoring the III subtype.
    pub fn same_class(&self, other: &FactorType) -> bool {
        match (self, other) {
            (FactorType::III(_), FactorType::III(_)) => true,
            _ => self == other,
        }
    }

    pub fn to_json(&self) -> Json {
        let mut v = json!({"type": self.name()});
        match self {
            FactorType::IFinite(n) => v["dimension"] = json!(n.to_string()),
            FactorType::III(Subtype::Lambda { estimate, tolerance, heuristic }) => {
                v["lambda"] = json!({"estimate": estimate, "tolerance": tolerance, "heuristic": heuristic})
            }
            FactorType::III(Subtype::Unknown) => v["lambda"] = json!("SUBTYPE_UNKNOWN"),
            FactorType::Indeterminate(reason) => v["reason"] = json!(reason),
            _ => {}
        }
        v
    }
}

impl fmt::Display for FactorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorType::IFinite(n) => write!(f, "I_FINITE({n})"),
            FactorType::III(Subtype::Lambda { estimate, .. }) => write!(f, "III({estimate:.6})"),
            FactorType::III(Subtype::Unknown) => write!(f, "III(SUBTYPE_UNKNOWN)"),
            FactorType::Indeterminate(r) => write!(f, "INDETERMINATE({r})"),
            other => write!(f, "{}", other.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub c: Rational,
    pub delta_min: f64,
    pub epsilon: f64,
    /// Overrides the spec's truncation when set.
    pub truncation: Option<Truncation>,
    pub t_grid: usize,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self { c: rational::int(1), delta_min: 1e-6, epsilon: 1e-3, truncation: None, t_grid: 100 }
    }
}

impl ClassifierParams {
    pub fn validate(&self) -> Result<()> {
        if !self.c.is_positive() {
            return Err(ClassifyError::InvalidParams("C must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ClassifyError::InvalidParams("epsilon must lie in (0, 1)".into()));
        }
        if !(self.delta_min > 0.0 && self.delta_min <= 1.0) {
            return Err(ClassifyError::InvalidParams("delta_min must lie in (0, 1]".into()));
        }
        Ok(())
    }

    fn truncation_for(&self, spec: &ItpfiSpec) -> Truncation {
        self.truncation.unwrap_or(spec.truncation)
    }
}

/// Per-block numeric data at the truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRow {
    pub primes: Vec<u64>,
    pub levels: Vec<(f64, u64)>,
    pub three_term: f64,
    pub deficit: f64,
}

fn block_levels(shape: Option<&Shape>, spec: &ItpfiSpec, block: &[u64], levels: usize) -> Result<Vec<(f64, u64)>> {
    let mut acc = vec![(1.0f64, 1u64)];
    for &p in block {
        let next: Vec<(f64, u64)> = match shape {
            Some(s) => s.numeric_levels(p, levels),
            None => spec.list_at(p)?.levels(levels).iter().map(|e| (e.value.to_f64(), e.mult)).collect(),
        };
        acc = if acc.len() == 1 && acc[0] == (1.0, 1) {
            next
        } else {
            let mut prod = Vec::with_capacity(acc.len() * next.len());
            for &(a, ma) in &acc {
                for &(b, mb) in &next {
                    prod.push((a * b, ma.saturating_mul(mb)));
                }
            }
            prod.sort_by(|x, y| y.0.total_cmp(&x.0));
            let mut merged: Vec<(f64, u64)> = Vec::new();
            for (x, m) in prod {
                match merged.last_mut() {
                    Some(last) if (last.0 - x).abs() <= 1e-12 * last.0 => last.1 = last.1.saturating_add(m),
                    _ => merged.push((x, m)),
                }
            }
            merged.truncate(levels);
            merged
        };
    }
    acc.retain(|&(v, _)| v > 1e-300);
    Ok(acc)
}

fn three_term(levels: &[(f64, u64)], c: f64) -> f64 {
    let Some(&(top, _)) = levels.first() else { return 0.0 };
    levels[1..].iter().map(|&(v, m)| v * m as f64 * ((top / v - 1.0).powi(2)).min(c)).sum()
}

fn safe_shape(spec: &ItpfiSpec) -> Result<Option<Shape>> {
    match spec.shape() {
        Ok(s) => Ok(Some(s)),
        Err(SpecError::Rule(RuleError::GrammarEscape(_))) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Numeric rows for the first `truncation.primes` index primes.
pub fn evidence_rows(spec: &ItpfiSpec, params: &ClassifierParams) -> Result<Vec<BlockRow>> {
    let t = params.truncation_for(spec);
    let shape = safe_shape(spec)?;
    let c = rational::to_f64(&params.c);
    spec.subset
        .blocks(t.primes)
        .into_iter()
        .map(|block| {
            let levels = block_levels(shape.as_ref(), spec, &block, t.levels)?;
            let three = three_term(&levels, c);
            let deficit = 1.0 - levels.first().map_or(1.0, |l| l.0);
            Ok(BlockRow { primes: block, levels, three_term: three, deficit })
        })
        .collect()
}

fn unknown_from(rows: &[BlockRow], f: impl Fn(&BlockRow) -> f64, rule: &str) -> Verdict {
    Verdict::Unknown { partial_sum: rows.iter().map(f).sum(), terms: rows.len(), rule: rule.into() }
}

fn core_of(shape: &Shape) -> Shape {
    match shape {
        Shape::Tensor(v) => {
            let mut rest: Vec<Shape> = v.iter().filter(|s| !s.is_uniform()).cloned().collect();
            match rest.len() {
                0 => Shape::PointMass,
                1 => rest.pop().unwrap(),
                _ => Shape::Tensor(rest),
            }
        }
        s if s.is_uniform() => Shape::PointMass,
        s => s.clone(),
    }
}

/// The type III series; DIVERGES means type III.
pub fn type_three_test(spec: &ItpfiSpec, params: &ClassifierParams) -> Result<Verdict> {
    params.validate()?;
    let Some(shape) = safe_shape(spec)? else {
        let rows = evidence_rows(spec, params)?;
        return Ok(unknown_from(&rows, |r| r.three_term, "grammar_escape"));
    };
    let top = core_of(&shape).top_lower();
    if top < params.delta_min {
        return Err(ClassifyError::DeltaViolated { top, required: params.delta_min });
    }
    Ok(decide(&three_series(&shape, spec, params))?)
}

fn three_series(shape: &Shape, spec: &ItpfiSpec, params: &ClassifierParams) -> PrimeSeries {
    let off = shape.off_top(&spec.subset);
    match shape.gap() {
        None => PrimeSeries::zero(spec.subset.clone()),
        Some(gap) => {
            let c = rational::to_f64(&params.c);
            off.with_factors((gap - 1.0).powi(2).min(c), c)
        }
    }
}

/// The top-eigenvalue series `Σ (1 - λ_{n,1})`; CONVERGES means type I.
pub fn type_one_test(spec: &ItpfiSpec) -> Result<Verdict> {
    match safe_shape(spec)? {
        Some(shape) => Ok(decide(&shape.deficit(&spec.subset))?),
        None => {
            let rows = evidence_rows(spec, &ClassifierParams::default())?;
            Ok(unknown_from(&rows, |r| r.deficit, "grammar_escape"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioWindow {
    pub ratio: f64,
    pub weight_fraction: f64,
    pub persistent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioEstimate {
    pub subtype: Subtype,
    pub windows: Vec<RatioWindow>,
    pub reason: String,
}

const PERSISTENT_FRACTION: f64 = 0.05;
const PERSISTENT_COVERAGE: f64 = 0.25;
const MAX_GENERATOR_DIVISOR: u32 = 4;
const MAX_LATTICE_MULTIPLE: f64 = 64.0;

#[derive(Default)]
struct Bin {
    weight: f64,
    weighted_log: f64,
    blocks: Vec<u32>,
}

/// Heuristic subdivision of a type III verdict from consecutive-level ratios.
///
/// Ratios `λ_{i+1}/λ_i` are binned in log scale with width `epsilon`, weighted
/// by `m_{i+1} λ_{i+1}`. A 3-bin window is persistent when it carries at least
/// 5% of the weight and is hit by at least a quarter of the blocks in each
/// half of the truncation. The persistent log-ratios are then fitted to a
/// lattice `g Z`: a fit gives `III(e^{-g})`, ratios near 1 or no fit give
/// `III(1)`, and no persistent window gives `III(0)`.
pub fn ratio_set(spec: &ItpfiSpec, params: &ClassifierParams) -> Result<RatioEstimate> {
    params.validate()?;
    let rows = evidence_rows(spec, params)?;
    Ok(ratio_set_from_rows(&rows, params.epsilon))
}

fn ratio_set_from_rows(rows: &[BlockRow], eps: f64) -> RatioEstimate {
    let mut bins: HashMap<i64, Bin> = HashMap::new();
    let mut total = 0.0;
    for (i, row) in rows.iter().enumerate() {
        for w in row.levels.windows(2) {
            let (hi, lo) = (w[0], w[1]);
            let r = lo.0 / hi.0;
            let weight = lo.0 * lo.1 as f64;
            let log = -r.ln();
            let b = bins.entry((log / eps).floor() as i64).or_default();
            b.weight += weight;
            b.weighted_log += weight * log;
            if b.blocks.last() != Some(&(i as u32)) {
                b.blocks.push(i as u32);
            }
            total += weight;
        }
    }
    if total <= 0.0 {
        return RatioEstimate { subtype: Subtype::Unknown, windows: vec![], reason: "no ratios at truncation".into() };
    }
    let mut order: Vec<(i64, f64)> = bins.iter().map(|(&k, b)| (k, b.weight)).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let half = rows.len().div_ceil(2) as u32;
    let (n_first, n_second) = (half as f64, (rows.len() as u32 - half) as f64);
    let mut centers: Vec<i64> = Vec::new();
    let mut windows = Vec::new();
    let mut logs = Vec::new();
    for (center, _) in order {
        if centers.iter().any(|&c| (c - center).abs() <= 2) {
            continue;
        }
        centers.push(center);
        let mut weight = 0.0;
        let mut weighted_log = 0.0;
        let mut hit: Vec<u32> = Vec::new();
        for k in center - 1..=center + 1 {
            if let Some(b) = bins.get(&k) {
                weight += b.weight;
                weighted_log += b.weighted_log;
                hit.extend(&b.blocks);
            }
        }
        let fraction = weight / total;
        if fraction < PERSISTENT_FRACTION {
            break;
        }
        hit.sort_unstable();
        hit.dedup();
        let first = hit.iter().filter(|&&i| i < half).count() as f64;
        let second = hit.len() as f64 - first;
        let persistent = first >= PERSISTENT_COVERAGE * n_first
            && (n_second == 0.0 || second >= PERSISTENT_COVERAGE * n_second);
        let log = weighted_log / weight;
        windows.push(RatioWindow { ratio: (-log).exp(), weight_fraction: fraction, persistent });
        if persistent {
            logs.push(log);
        }
    }
    let lambda = |estimate: f64| Subtype::Lambda { estimate, tolerance: eps, heuristic: true };
    let (subtype, reason) = if logs.is_empty() {
        (lambda(0.0), "no persistent ratio".to_string())
    } else if logs.iter().any(|&l| l < eps) {
        (lambda(1.0), "persistent ratio near 1".to_string())
    } else {
        match fit_lattice(&logs, eps) {
            Some(g) => (lambda((-g).exp()), format!("single generator from {} persistent ratio(s)", logs.len())),
            None => (lambda(1.0), "persistent ratios generate a dense group".to_string()),
        }
    };
    RatioEstimate { subtype, windows, reason }
}

/// Largest `g = a_min / k`, k <= 4, with every log a small integer multiple
/// of g within the window width.
fn fit_lattice(logs: &[f64], eps: f64) -> Option<f64> {
    let a_min = logs.iter().copied().fold(f64::INFINITY, f64::min);
    (1..=MAX_GENERATOR_DIVISOR).map(|k| a_min / k as f64).find(|&g| {
        logs.iter().all(|&a| {
            let n = (a / g).round();
            (1.0..=MAX_LATTICE_MULTIPLE).contains(&n) && (a - n * g).abs() <= 2.0 * eps
        })
    })
}

/// Probe `Σ_n (1 - |Σ_i m_{n,i} λ_{n,i}^{1+it}|)`; CONVERGES marks t as a
/// candidate of the T invariant.
pub fn t_test(spec: &ItpfiSpec, t: f64) -> Result<Verdict> {
    if t == 0.0 {
        return Ok(Verdict::Converges { upper_bound: rational::int(0), rule: "mass_normalization".into() });
    }
    let shape = safe_shape(spec)?;
    if let Some(shape) = shape.as_ref().filter(|s| s.is_p_independent()) {
        let levels = shape.numeric_levels(2, usize::MAX);
        let term = t_term(&levels, t);
        if term.abs() <= 1e-12 {
            return Ok(Verdict::Converges { upper_bound: rational::int(0), rule: "vanishing_terms".into() });
        }
        if spec.subset.is_infinite() {
            return Ok(Verdict::Diverges { rule: "nonvanishing_terms_diverge".into() });
        }
        let n = spec.subset.explicit_primes().len() as f64;
        let bound = rational::from_f64(term * n * (1.0 + 1e-9)).unwrap_or_else(|| rational::int(1));
        return Ok(Verdict::Converges { upper_bound: bound, rule: "finite_index_set".into() });
    }
    if let Some(shape) = &shape {
        // each term is at most twice the off-top mass
        let v = decide(&shape.off_top(&spec.subset).with_factors(0.0, 2.0))?;
        if v.converges() {
            return Ok(v);
        }
    }
    let params = ClassifierParams::default();
    let rows = evidence_rows(spec, &params)?;
    Ok(unknown_from(&rows, |r| t_term(&r.levels, t), "t_probe_partial_sum"))
}

fn t_term(levels: &[(f64, u64)], t: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for &(v, m) in levels {
        let phase = t * v.ln();
        let w = v * m as f64;
        re += w * phase.cos();
        im += w * phase.sin();
    }
    1.0 - re.hypot(im)
}

/// `t_k = k π / ln(1/λ)`, k = 0..n: even k on the lattice of Powers(λ), odd k
/// at the midpoints.
pub fn t_grid(lambda: f64, n: usize) -> Vec<f64> {
    let period = PI / (1.0 / lambda).ln();
    (0..n).map(|k| k as f64 * period).collect()
}

/// Type of a tensor product.
pub fn tensor_type(a: &FactorType, b: &FactorType) -> Result<FactorType> {
    use FactorType::*;
    Ok(match (a, b) {
        (Indeterminate(_), _) | (_, Indeterminate(_)) => return Err(ClassifyError::IndeterminateInput),
        (III(x), III(y)) => III(match (x, y) {
            (Subtype::Lambda { estimate: l1, tolerance: t1, heuristic: h1 }, Subtype::Lambda { estimate: l2, tolerance: t2, heuristic: h2 }) => {
                if (l1 - l2).abs() <= t1.max(*t2) {
                    x.clone()
                } else if *l1 == 1.0 || *l2 == 1.0 {
                    Subtype::Lambda { estimate: 1.0, tolerance: t1.max(*t2), heuristic: *h1 || *h2 }
                } else {
                    Subtype::Unknown
                }
            }
            _ => Subtype::Unknown,
        }),
        (III(x), _) | (_, III(x)) => III(x.clone()),
        (IFinite(n), IFinite(m)) => IFinite(n * m),
        (IFinite(n), other) | (other, IFinite(n)) if n.is_one() => other.clone(),
        (IFinite(_), other) | (other, IFinite(_)) => other.clone(),
        (IInf, IInf) => IInf,
        (II1, II1) => II1,
        _ => IIInf,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub factor: FactorType,
    pub type_three: Verdict,
    pub type_one: Option<Verdict>,
    pub ratio: Option<RatioEstimate>,
    pub certificates: Vec<Certificate>,
    pub top_lower: Option<f64>,
    pub three_partial_sum: f64,
    pub deficit_partial_sum: f64,
    pub terms: usize,
}

impl Classification {
    /// The rule behind the decisive series verdict.
    pub fn rule(&self) -> &str {
        match (&self.type_one, self.type_three.converges()) {
            (Some(one), true) => one.rule(),
            _ => self.type_three.rule(),
        }
    }

    pub fn to_json(&self) -> Json {
        let mut v = self.factor.to_json();
        let mut evidence = json!({
            "rule": self.rule(),
            "type_three": self.type_three.to_json(),
            "numeric": {
                "terms": self.terms,
                "type_three_partial_sum": self.three_partial_sum,
                "type_one_partial_sum": self.deficit_partial_sum,
            },
        });
        if let Some(one) = &self.type_one {
            evidence["type_one"] = one.to_json();
        }
        if let Some(top) = self.top_lower {
            evidence["top_eigenvalue_lower_bound"] = json!(top);
        }
        if let Some(r) = &self.ratio {
            evidence["ratio_set"] = json!({
                "reason": r.reason,
                "windows": r.windows.iter().map(|w| json!({
                    "ratio": w.ratio, "weight_fraction": w.weight_fraction, "persistent": w.persistent,
                })).collect::<Vec<_>>(),
            });
        }
        if !self.certificates.is_empty() {
            evidence["certificates"] = self
                .certificates
                .iter()
                .map(|c| json!({"operation": c.operation, "verdict": c.verdict.to_json()}))
                .collect();
        }
        v["evidence"] = evidence;
        v
    }
}

fn indeterminate(reason: &str, three: Verdict, one: Option<Verdict>) -> Classification {
    Classification {
        factor: FactorType::Indeterminate(reason.into()),
        type_three: three,
        type_one: one,
        ratio: None,
        certificates: vec![],
        top_lower: None,
        three_partial_sum: 0.0,
        deficit_partial_sum: 0.0,
        terms: 0,
    }
}

pub fn classify(spec: &ItpfiSpec, params: &ClassifierParams) -> Result<Classification> {
    params.validate()?;
    let shape = safe_shape(spec)?;
    let working = match &shape {
        Some(s) if s.contains_dual() => spec.remove_summable_copies()?,
        _ => spec.clone(),
    };
    let shape = safe_shape(&working)?;
    let rows = evidence_rows(&working, params)?;
    let three = type_three_test(&working, params)?;
    let mut out = match &three {
        Verdict::Diverges { .. } => {
            let ratio = ratio_set_from_rows(&rows, params.epsilon);
            Classification {
                factor: FactorType::III(ratio.subtype.clone()),
                type_three: three.clone(),
                type_one: None,
                ratio: Some(ratio),
                certificates: vec![],
                top_lower: None,
                three_partial_sum: 0.0,
                deficit_partial_sum: 0.0,
                terms: 0,
            }
        }
        Verdict::Unknown { .. } => indeterminate("type III series undecided", three.clone(), None),
        Verdict::Converges { .. } => {
            let one = type_one_test(&working)?;
            let factor = match (&one, &shape) {
                (Verdict::Unknown { .. }, _) | (_, None) => FactorType::Indeterminate("type I series undecided".into()),
                (Verdict::Converges { .. }, Some(s)) => type_one_kind(s, &working),
                (Verdict::Diverges { .. }, Some(s)) => {
                    // type I core tensored with a tracial factor
                    let core = core_of(s);
                    let core_one = decide(&core.deficit(&working.subset))?;
                    if core_one.converges() && matches!(type_one_kind(&core, &working), FactorType::IInf) {
                        FactorType::IIInf
                    } else {
                        FactorType::II1
                    }
                }
            };
            Classification {
                factor,
                type_three: three.clone(),
                type_one: Some(one),
                ratio: None,
                certificates: vec![],
                top_lower: None,
                three_partial_sum: 0.0,
                deficit_partial_sum: 0.0,
                terms: 0,
            }
        }
    };
    if working.amplified {
        out.factor = match out.factor {
            FactorType::IFinite(_) => FactorType::IInf,
            FactorType::II1 => FactorType::IIInf,
            f => f,
        };
    }
    out.certificates = working.certificates.clone();
    out.top_lower = shape.as_ref().map(|s| core_of(s).top_lower());
    out.three_partial_sum = rows.iter().map(|r| r.three_term).sum();
    out.deficit_partial_sum = rows.iter().map(|r| r.deficit).sum();
    out.terms = rows.len();
    Ok(out)
}

/// Type I with one-dimensional top corner: I_INF when infinitely many
/// nontrivial lists or an infinite list occur.
fn type_one_kind(shape: &Shape, spec: &ItpfiSpec) -> FactorType {
    if shape.is_infinite() || (spec.subset.is_infinite() && shape.is_nontrivial()) {
        return FactorType::IInf;
    }
    let mut dim = BigUint::one();
    for &p in spec.subset.explicit_primes() {
        match shape.dimension(p) {
            Some(d) => dim *= BigUint::from(d),
            None => return FactorType::IInf,
        }
    }
    FactorType::IFinite(dim)
}
