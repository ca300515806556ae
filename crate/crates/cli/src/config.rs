use std::fs;
use std::path::Path;

use qgtype_core::classifier::ClassifierParams;
use qgtype_core::padic::PrecisionContext;
use qgtype_core::rational;
use qgtype_core::spec::Truncation;
use serde::Deserialize;

pub const PRECISION_ENV: &str = "QGTYPE_PRECISION";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifierSection {
    #[serde(rename = "C")]
    c: Option<String>,
    delta_min: Option<f64>,
    epsilon: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruncationSection {
    primes: Option<usize>,
    levels: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    precision: Option<usize>,
    classifier: Option<ClassifierSection>,
    truncation: Option<TruncationSection>,
    format: Option<Format>,
    seed: Option<u64>,
}

/// Resolved settings. Precedence: defaults, then `QGTYPE_PRECISION`, then the
/// config file, then command-line flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub precision: PrecisionContext,
    pub params: ClassifierParams,
    /// Set only when the config overrides the spec's own truncation.
    pub truncation: Option<Truncation>,
    pub format: Option<Format>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            precision: PrecisionContext::default(),
            params: ClassifierParams::default(),
            truncation: None,
            format: None,
            seed: 0,
        }
    }
}

fn precision(digits: usize) -> Result<PrecisionContext, String> {
    PrecisionContext::new(digits).map_err(|e| format!("precision {digits}: {e}"))
}

impl RunConfig {
    pub fn load(path: Option<&Path>, env_precision: Option<String>, flag_precision: Option<usize>) -> Result<Self, String> {
        let mut cfg = RunConfig::default();
        if let Some(raw) = env_precision {
            let digits = raw.trim().parse().map_err(|_| format!("{PRECISION_ENV}={raw} is not a positive integer"))?;
            cfg.precision = precision(digits)?;
        }
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let file: ConfigFile = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            cfg.apply(file)?;
        }
        if let Some(digits) = flag_precision {
            cfg.precision = precision(digits)?;
        }
        cfg.params.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    fn apply(&mut self, file: ConfigFile) -> Result<(), String> {
        if let Some(d) = file.precision {
            self.precision = precision(d)?;
        }
        if let Some(c) = file.classifier {
            if let Some(text) = c.c {
                self.params.c = rational::parse_rational(&text).ok_or_else(|| format!("classifier.C = {text}"))?;
            }
            if let Some(d) = c.delta_min {
                self.params.delta_min = d;
            }
            if let Some(e) = c.epsilon {
                self.params.epsilon = e;
            }
        }
        if let Some(t) = file.truncation {
            let mut tr = Truncation::default();
            if let Some(p) = t.primes {
                tr.primes = p;
            }
            if let Some(l) = t.levels {
                tr.levels = l;
            }
            if tr.primes == 0 || tr.levels == 0 {
                return Err("truncation depths must be positive".into());
            }
            self.truncation = Some(tr);
            self.params.truncation = Some(tr);
        }
        self.format = file.format.or(self.format);
        self.seed = file.seed.unwrap_or(self.seed);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn precedence() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"precision": 12, "classifier": {{"C": "1/4"}}, "truncation": {{"primes": 50}}, "seed": 7}}"#).unwrap();
        let cfg = RunConfig::load(Some(f.path()), Some("20".into()), None).unwrap();
        assert_eq!(cfg.precision.digits(), 12);
        assert_eq!(cfg.params.c, rational::rat(1, 4));
        assert_eq!(cfg.truncation, Some(Truncation { primes: 50, levels: 64 }));
        assert_eq!(cfg.seed, 7);
        let cfg = RunConfig::load(Some(f.path()), None, Some(40)).unwrap();
        assert_eq!(cfg.precision.digits(), 40);
        assert_eq!(RunConfig::load(None, Some("20".into()), None).unwrap().precision.digits(), 20);
    }

    #[test]
    fn rejects_bad_fields() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"precison": 12}}"#).unwrap();
        assert!(RunConfig::load(Some(f.path()), None, None).is_err());
        assert!(RunConfig::load(None, Some("zero".into()), None).is_err());
        assert!(RunConfig::load(None, None, Some(0)).is_err());
    }
}
