//! ITPFI specifications: a prime subset, a list rule and truncation depths.

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::eigen::EigenvalueList;
use crate::rules::{ListRule, RuleError, Shape};
use crate::series::{decide, SeriesError, Verdict};
use crate::subset::{PrimeSubset, SubsetError};

#[derive(Debug, Error, Clone)]
pub enum SpecError {
    #[error("removed mass series diverges ({}): the projection is 0", .0.rule())]
    NullProjection(Verdict),
    #[error("removed mass series undecided: {0}")]
    Undecided(Verdict),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Subset(#[from] SubsetError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("bad spec json: {0}")]
    Json(String),
}

impl SpecError {
    /// Stable error name for reports.
    pub fn name(&self) -> &'static str {
        match self {
            SpecError::NullProjection(_) => "NullProjection",
            SpecError::Undecided(_) => "Undecided",
            SpecError::Rule(RuleError::NotNormalized) => "NotNormalized",
            SpecError::Rule(RuleError::NotInvariant) => "NotInvariant",
            SpecError::Rule(RuleError::NotASubgroup) => "NotASubgroup",
            SpecError::Rule(RuleError::GrammarEscape(_)) => "GrammarEscape",
            SpecError::Rule(RuleError::List(_)) => "TailBlowup",
            SpecError::Rule(_) => "InvalidRule",
            SpecError::Subset(_) => "InvalidSubset",
            SpecError::Series(_) => "SeriesError",
            SpecError::Json(_) => "InvalidSpec",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub primes: usize,
    pub levels: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { primes: 1000, levels: 64 }
    }
}

/// Record of a reduction that does not change the isomorphism class.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub operation: String,
    pub verdict: Verdict,
}

/// Which prefix of every list a corner keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeepRule {
    All,
    /// The `m` largest distinct eigenvalues with their multiplicities.
    TopLevels(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItpfiSpec {
    pub subset: PrimeSubset,
    pub rule: ListRule,
    pub truncation: Truncation,
    /// The factor is a corner of an infinite algebra; forces the _INF types.
    pub amplified: bool,
    pub certificates: Vec<Certificate>,
}

impl ItpfiSpec {
    pub fn new(subset: PrimeSubset, rule: ListRule) -> Self {
        Self { subset, rule, truncation: Truncation::default(), amplified: false, certificates: vec![] }
    }

    pub fn with_truncation(mut self, truncation: Truncation) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn amplify(mut self) -> Self {
        self.amplified = true;
        self
    }

    pub fn list_at(&self, p: u64) -> Result<EigenvalueList, SpecError> {
        Ok(self.rule.list_at(p)?)
    }

    /// Lists for the first `truncation.primes` members.
    pub fn lists(&self) -> Result<Vec<(u64, EigenvalueList)>, SpecError> {
        self.subset
            .primes(self.truncation.primes)
            .into_iter()
            .map(|p| Ok((p, self.list_at(p)?)))
            .collect()
    }

    pub fn shape(&self) -> Result<Shape, SpecError> {
        Ok(self.rule.shape()?)
    }

    /// Compresses every list to its kept prefix. The product
    /// projection is nonzero iff the removed masses are summable.
    pub fn corner_reduce(&self, keep: KeepRule) -> Result<ItpfiSpec, SpecError> {
        let m = match keep {
            KeepRule::All => return Ok(self.clone()),
            KeepRule::TopLevels(m) => m,
        };
        let removed = self.shape()?.removed_top(m, &self.subset)?;
        let verdict = decide(&removed)?;
        self.reduced(verdict, format!("keep_top_levels({m})"), |inner| ListRule::Truncated { inner, levels: m })
    }

    /// Lowers every multiplicity to the smallest one when the removed copies
    /// have summable mass.
    pub fn remove_summable_copies(&self) -> Result<ItpfiSpec, SpecError> {
        let removed = self.shape()?.removed_equalize(&self.subset)?;
        if removed.is_zero() {
            return Ok(self.clone());
        }
        let verdict = decide(&removed)?;
        self.reduced(verdict, "remove_summable_copies".into(), |inner| ListRule::Equalized { inner })
    }

    fn reduced(
        &self,
        verdict: Verdict,
        operation: String,
        wrap: impl FnOnce(Box<ListRule>) -> ListRule,
    ) -> Result<ItpfiSpec, SpecError> {
        match verdict {
            Verdict::Converges { .. } => {
                let mut out = self.clone();
                out.rule = wrap(Box::new(self.rule.clone()));
                out.certificates.push(Certificate { operation, verdict });
                Ok(out)
            }
            Verdict::Diverges { .. } => Err(SpecError::NullProjection(verdict)),
            Verdict::Unknown { .. } => Err(SpecError::Undecided(verdict)),
        }
    }

    pub fn to_json(&self) -> Json {
        let mut v = json!({
            "subset": self.subset.to_json(),
            "rule": self.rule.to_json(),
            "truncation": {"primes": self.truncation.primes, "levels": self.truncation.levels},
            "amplified": self.amplified,
        });
        if !self.certificates.is_empty() {
            v["certificates"] = self
                .certificates
                .iter()
                .map(|c| json!({"operation": c.operation, "verdict": c.verdict.to_json()}))
                .collect();
        }
        v
    }

    pub fn from_json(v: &Json) -> Result<Self, SpecError> {
        let subset = PrimeSubset::from_json(v.get("subset").ok_or_else(|| SpecError::Json("missing subset".into()))?)?;
        let rule = ListRule::from_json(v.get("rule").ok_or_else(|| SpecError::Json("missing rule".into()))?)?;
        let mut truncation = Truncation::default();
        if let Some(t) = v.get("truncation") {
            let field = |k: &str, d: usize| -> Result<usize, SpecError> {
                match t.get(k) {
                    None => Ok(d),
                    Some(x) => x
                        .as_u64()
                        .filter(|&n| n > 0)
                        .map(|n| n as usize)
                        .ok_or_else(|| SpecError::Json(format!("truncation.{k} must be a positive integer"))),
                }
            };
            truncation = Truncation { primes: field("primes", truncation.primes)?, levels: field("levels", truncation.levels)? };
        }
        let amplified = match v.get("amplified") {
            None => false,
            Some(b) => b.as_bool().ok_or_else(|| SpecError::Json("amplified must be a boolean".into()))?,
        };
        Ok(Self { subset, rule, truncation, amplified, certificates: vec![] })
    }

    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let v: Json = serde_json::from_str(text).map_err(|e| SpecError::Json(e.to_string()))?;
        Self::from_json(&v)
    }
}
