//! The quantum groups of the `a x + b` matched pair over a set of primes.
//!
//! `M_S` and its dual are ITPFI factors with the corner lists of
//! `(Z_p*, Z_p)` and `(1 + pZ_p, Z_p* - 1)`; the self-dual variant uses
//! `(1 + pZ_p, Z_p)`. All three are corners of purely infinite crossed
//! products, so their specs carry the amplification flag.

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::classifier::{classify, tensor_type, Classification, ClassifierParams, ClassifyError, FactorType};
use crate::eigen::EigenvalueList;
use crate::matched_pair::{null_slice_measure, verify_identities};
use crate::padic::PrecisionContext;
use crate::rational::{self, Rational};
use crate::rules::{boca_list, ListRule, SizeRule};
use crate::series::{decide, reciprocal_sum, Verdict};
use crate::spec::ItpfiSpec;
use crate::subset::{PrimeSubset, SubsetTail};

pub fn ms_spec(s: &PrimeSubset) -> ItpfiSpec {
    ItpfiSpec::new(s.clone(), ListRule::corner_units()).amplify()
}

pub fn ms_dual_spec(s: &PrimeSubset) -> ItpfiSpec {
    ItpfiSpec::new(s.clone(), ListRule::corner_dual()).amplify()
}

pub fn ls_spec(s: &PrimeSubset) -> ItpfiSpec {
    ItpfiSpec::new(s.clone(), ListRule::corner_ls()).amplify()
}

/// Which of `A_S - A_S*` and `A_S*` is null for the additive Haar measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFacts {
    /// `Π_p (1 - 1/p)` over the truncation.
    pub units_partial_product: f64,
    pub units_null: Option<bool>,
    pub non_units_null: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumGroupReport {
    pub subset: PrimeSubset,
    pub m_type: FactorType,
    pub m_dual_type: FactorType,
    pub m: Option<Classification>,
    pub m_dual: Option<Classification>,
    pub reciprocal_sum: Verdict,
    pub measure: MeasureFacts,
    pub dual_equals_tensor: bool,
    pub self_dual: bool,
}

impl QuantumGroupReport {
    pub fn types(&self) -> (&FactorType, &FactorType) {
        (&self.m_type, &self.m_dual_type)
    }

    pub fn heuristic(&self) -> bool {
        self.m_type.is_three() || self.m_dual_type.is_three()
    }

    pub fn to_json(&self) -> Json {
        let side = |t: &FactorType, c: &Option<Classification>| c.as_ref().map_or_else(|| t.to_json(), Classification::to_json);
        json!({
            "subset": self.subset.to_json(),
            "types": [self.m_type.name(), self.m_dual_type.name()],
            "m": side(&self.m_type, &self.m),
            "m_dual": side(&self.m_dual_type, &self.m_dual),
            "sum_1_over_p": self.reciprocal_sum.to_json(),
            "measure": {
                "units_partial_product": self.measure.units_partial_product,
                "units_null": self.measure.units_null,
                "non_units_null": self.measure.non_units_null,
            },
            "checks": {"dual_equals_tensor": self.dual_equals_tensor, "self_dual": self.self_dual},
            "heuristic": self.heuristic(),
        })
    }
}

const SELF_DUAL_PRIMES: usize = 3;
const SELF_DUAL_SAMPLES: usize = 16;
const SELF_DUAL_BOUND: u64 = 100;

fn measure_facts(s: &PrimeSubset, verdict: &Verdict, primes: usize) -> MeasureFacts {
    let units_partial_product = s.primes(primes).iter().map(|&p| 1.0 - 1.0 / p as f64).product();
    let (units_null, non_units_null) = match (s.is_infinite(), verdict) {
        // Borel-Cantelli on one side, Π(1 - 1/p) = 0 on the other
        (true, Verdict::Converges { .. }) => (Some(false), Some(true)),
        (true, Verdict::Diverges { .. }) => (Some(true), Some(false)),
        _ => (None, None),
    };
    MeasureFacts { units_partial_product, units_null, non_units_null }
}

/// List equality with `boca(1) x UNIFORM(p-1)` and the self-dual identity on
/// samples, at the first few members below a small bound (enumeration cost),
/// or at 2, 3, 5 when the subset has none.
fn self_dual_check(s: &PrimeSubset) -> Result<bool, ClassifyError> {
    let mut primes: Vec<u64> = s.primes(SELF_DUAL_PRIMES).into_iter().filter(|&p| p <= SELF_DUAL_BOUND).collect();
    if primes.is_empty() {
        primes = vec![2, 3, 5];
    }
    let shape = ls_spec(s).shape()?;
    let expected_shape = ListRule::Tensor(vec![ListRule::boca(rational::int(1)), ListRule::Uniform(SizeRule::PrimeMinus(1))]).shape()?;
    if shape != expected_shape {
        return Ok(false);
    }
    for p in primes {
        let expected = boca_list(p, &rational::int(1))
            .tensor(&EigenvalueList::uniform(p - 1))
            .map_err(|e| ClassifyError::Spec(crate::spec::SpecError::Rule(e.into())))?;
        if ls_spec(s).list_at(p)? != expected {
            return Ok(false);
        }
        let report = verify_identities(p, SELF_DUAL_SAMPLES, p, PrecisionContext::default())
            .map_err(|e| ClassifyError::InvalidParams(e.to_string()))?;
        if report.selfdual_failures > 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

fn lambdas_agree(a: &FactorType, b: &FactorType, tol: f64) -> bool {
    match (a.lambda(), b.lambda()) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

pub fn classify_pair(s: &PrimeSubset, params: &ClassifierParams) -> Result<QuantumGroupReport, ClassifyError> {
    let reciprocal = decide(&reciprocal_sum(s))?;
    let primes = params.truncation.unwrap_or_default().primes;
    let measure = measure_facts(s, &reciprocal, primes);
    let self_dual = self_dual_check(s)?;
    if !s.is_infinite() {
        let reason = || FactorType::Indeterminate("finite subset: the dichotomy concerns infinite subsets".into());
        return Ok(QuantumGroupReport {
            subset: s.clone(),
            m_type: reason(),
            m_dual_type: reason(),
            m: None,
            m_dual: None,
            reciprocal_sum: reciprocal,
            measure,
            dual_equals_tensor: false,
            self_dual,
        });
    }
    let m = classify(&ms_spec(s), params)?;
    let d = classify(&ms_dual_spec(s), params)?;
    let dual_equals_tensor = match tensor_type(&m.factor, &FactorType::II1) {
        Ok(t) => t.same_class(&d.factor) && lambdas_agree(&t, &d.factor, params.epsilon),
        Err(_) => false,
    };
    Ok(QuantumGroupReport {
        subset: s.clone(),
        m_type: m.factor.clone(),
        m_dual_type: d.factor.clone(),
        m: Some(m),
        m_dual: Some(d),
        reciprocal_sum: reciprocal,
        measure,
        dual_equals_tensor,
        self_dual,
    })
}

/// Haar measure of the pairs outside the matched-pair product, with a
/// description of the null witness.
pub fn null_complement_check(s: &PrimeSubset) -> (Rational, String) {
    let total = s.explicit_primes().iter().fold(rational::int(0), |acc, &p| acc + null_slice_measure(p));
    let desc = format!(
        "complement = union over p in {} of the slices {{b_p = 1/p}}; each slice is a single point in its fiber, \
         so it is null and the countable union is null",
        describe(s)
    );
    (total, desc)
}

fn describe(s: &PrimeSubset) -> String {
    match s.tail() {
        SubsetTail::None => format!("{:?}", s.explicit_primes()),
        _ => s.to_json().to_string(),
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("target lambda {0} outside [0, 1]")]
    Precondition(f64),
    #[error("search budget exhausted after {attempts} candidate(s); best estimate {best:?}")]
    BudgetExhausted { attempts: usize, best: Option<f64> },
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

impl SearchError {
    pub fn name(&self) -> &'static str {
        match self {
            SearchError::Precondition(_) => "PreconditionViolated",
            SearchError::BudgetExhausted { .. } => "BudgetExhausted",
            SearchError::Classify(e) => e.name(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub subset: PrimeSubset,
    pub report: QuantumGroupReport,
    pub attempts: usize,
}

const SEARCH_Q_MIN: [u64; 6] = [5, 101, 1009, 10007, 100003, 1000003];

/// Candidate subsets for a target ratio: ALL_PRIMES for 0, otherwise ratio
/// pairs `q/p ≈ λ` starting at increasing `q_min`. Accepts the first
/// candidate whose heuristic estimate lies within `epsilon` of the target.
pub fn search_lambda(target: f64, budget: usize, params: &ClassifierParams) -> Result<SearchResult, SearchError> {
    if !(0.0..=1.0).contains(&target) {
        return Err(SearchError::Precondition(target));
    }
    let candidates: Vec<PrimeSubset> = if target == 0.0 {
        vec![PrimeSubset::all_primes()]
    } else {
        let lambda = Rational::new(((target * 1e6).round() as i64).into(), 1_000_000.into());
        SEARCH_Q_MIN
            .iter()
            .map(|&q| PrimeSubset::ratio_pairs(lambda.clone(), q))
            .collect::<Result<_, _>>()
            .map_err(|e| SearchError::Classify(ClassifyError::Spec(e.into())))?
    };
    let mut best: Option<f64> = None;
    for (i, subset) in candidates.into_iter().take(budget).enumerate() {
        let report = classify_pair(&subset, params)?;
        if let Some(est) = report.m_type.lambda() {
            if best.is_none_or(|b| (b - target).abs() > (est - target).abs()) {
                best = Some(est);
            }
            if (est - target).abs() <= params.epsilon && report.m_dual_type.is_three() {
                return Ok(SearchResult { subset, report, attempts: i + 1 });
            }
        }
    }
    Err(SearchError::BudgetExhausted { attempts: budget.min(SEARCH_Q_MIN.len()), best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subset::GrowthClass;

    #[test]
    fn dichotomy() {
        let params = ClassifierParams::default();
        let all = classify_pair(&PrimeSubset::all_primes(), &params).unwrap();
        assert_eq!((all.m_type.name(), all.m_dual_type.name()), ("III", "III"));
        assert_eq!(all.reciprocal_sum.rule(), "sum_1_over_p_diverges");
        assert!(all.dual_equals_tensor && all.self_dual);
        assert_eq!(all.measure.units_null, Some(true));
        let sparse = PrimeSubset::growth(GrowthClass::Polynomial { degree: 2 }).unwrap();
        let r = classify_pair(&sparse, &params).unwrap();
        assert_eq!(r.types(), (&FactorType::IInf, &FactorType::IIInf));
        assert!(r.dual_equals_tensor && r.self_dual);
        assert_eq!(r.measure.non_units_null, Some(true));
    }

    #[test]
    fn finite_subset_is_indeterminate() {
        let r = classify_pair(&PrimeSubset::explicit(vec![2, 3]).unwrap(), &ClassifierParams::default()).unwrap();
        assert!(!r.m_type.is_determinate());
    }

    #[test]
    fn null_complement() {
        let (m, desc) = null_complement_check(&PrimeSubset::explicit(vec![2, 5]).unwrap());
        assert_eq!(m, rational::int(0));
        assert!(desc.contains("1/p"));
    }

    #[test]
    fn search() {
        let params = ClassifierParams::default();
        let half = search_lambda(0.5, 3, &params).unwrap();
        let est = half.report.m_type.lambda().unwrap();
        assert!((0.4995..=0.5005).contains(&est), "{est}");
        assert_eq!(search_lambda(0.0, 1, &params).unwrap().report.m_type.lambda(), Some(0.0));
        assert_eq!(search_lambda(1.0, 3, &params).unwrap().report.m_type.lambda(), Some(1.0));
        assert!(matches!(search_lambda(1.5, 3, &params), Err(SearchError::Precondition(_))));
        assert!(matches!(search_lambda(0.5, 0, &params), Err(SearchError::BudgetExhausted { .. })));
    }
}
