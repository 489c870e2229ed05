//! The experiment configuration: defaults, strict JSON loading and
//! command-line overrides, in that precedence order.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use klboost_core::catalog::PropertySchema;

/// Effective configuration after merging defaults, the config file and
/// command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Default smoothing rate; alpha ~ 0.5 works well in practice.
    pub alpha: f64,
    pub alpha_overrides: BTreeMap<String, f64>,
    pub significance: f64,
    pub n_samples: usize,
    pub m_max: usize,
    pub max_gap_seconds: i64,
    pub n: usize,
    pub smoothing_epsilon: f64,
    pub seed: u64,
    /// Direct per-property threshold overrides (the meta-parameter route).
    pub epsilon_overrides: BTreeMap<String, f64>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            alpha_overrides: BTreeMap::new(),
            significance: 0.05,
            n_samples: 20_000,
            m_max: 50,
            max_gap_seconds: 1800,
            n: 10,
            smoothing_epsilon: 1e-6,
            seed: 0,
            epsilon_overrides: BTreeMap::new(),
        }
    }
}

/// The JSON shape of a config file. Unknown keys are rejected so a typo
/// cannot silently fall back to a default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    alpha: Option<f64>,
    alpha_overrides: Option<BTreeMap<String, f64>>,
    significance: Option<f64>,
    n_samples: Option<usize>,
    #[serde(rename = "M_max")]
    m_max: Option<usize>,
    max_gap_seconds: Option<i64>,
    #[serde(rename = "N")]
    n: Option<usize>,
    smoothing_epsilon: Option<f64>,
    seed: Option<u64>,
    epsilon_overrides: Option<BTreeMap<String, f64>>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let file: ConfigFile = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        let mut config = Config::default();
        config.apply_file(file);
        Ok(config)
    }

    fn apply_file(&mut self, file: ConfigFile) {
        if let Some(v) = file.alpha {
            self.alpha = v;
        }
        if let Some(v) = file.alpha_overrides {
            self.alpha_overrides = v;
        }
        if let Some(v) = file.significance {
            self.significance = v;
        }
        if let Some(v) = file.n_samples {
            self.n_samples = v;
        }
        if let Some(v) = file.m_max {
            self.m_max = v;
        }
        if let Some(v) = file.max_gap_seconds {
            self.max_gap_seconds = v;
        }
        if let Some(v) = file.n {
            self.n = v;
        }
        if let Some(v) = file.smoothing_epsilon {
            self.smoothing_epsilon = v;
        }
        if let Some(v) = file.seed {
            self.seed = v;
        }
        if let Some(v) = file.epsilon_overrides {
            self.epsilon_overrides = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            bail!("alpha must be >= 0, got {}", self.alpha);
        }
        for (key, &a) in &self.alpha_overrides {
            if !a.is_finite() || a < 0.0 {
                bail!("alpha override for {key:?} must be >= 0, got {a}");
            }
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            bail!("significance must be in (0, 1), got {}", self.significance);
        }
        if self.n_samples < 1000 {
            bail!("n_samples must be at least 1000, got {}", self.n_samples);
        }
        if self.m_max == 0 {
            bail!("M_max must be at least 1");
        }
        if self.max_gap_seconds <= 0 {
            bail!("max_gap_seconds must be positive, got {}", self.max_gap_seconds);
        }
        if self.n == 0 {
            bail!("N must be at least 1");
        }
        if !(0.0..1.0).contains(&self.smoothing_epsilon) {
            bail!(
                "smoothing_epsilon must be in [0, 1), got {}",
                self.smoothing_epsilon
            );
        }
        for (key, &eps) in &self.epsilon_overrides {
            if !eps.is_finite() || eps < 0.0 {
                bail!("epsilon override for {key:?} must be >= 0, got {eps}");
            }
        }
        Ok(())
    }

    /// Per-property smoothing rates in schema order: the default alpha with
    /// any per-key overrides applied. Overrides naming unknown properties
    /// are rejected.
    pub fn resolve_alphas(&self, schema: &PropertySchema) -> Result<Vec<f64>> {
        for key in self.alpha_overrides.keys() {
            if schema.property_index(key).is_none() {
                bail!("alpha override names unknown property {key:?}");
            }
        }
        Ok(schema
            .keys()
            .map(|k| self.alpha_overrides.get(k).copied().unwrap_or(self.alpha))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn defaults_match_documented_values() {
        let c = Config::default();
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.significance, 0.05);
        assert_eq!(c.n_samples, 20_000);
        assert_eq!(c.m_max, 50);
        assert_eq!(c.max_gap_seconds, 1800);
        assert_eq!(c.n, 10);
        assert_eq!(c.smoothing_epsilon, 1e-6);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn file_overrides_defaults() {
        let f = write_tmp(r#"{"alpha": 0.25, "N": 20, "M_max": 8}"#);
        let c = Config::load(f.path()).unwrap();
        assert_eq!(c.alpha, 0.25);
        assert_eq!(c.n, 20);
        assert_eq!(c.m_max, 8);
        assert_eq!(c.significance, 0.05);
    }

    #[test]
    fn unknown_keys_rejected() {
        let f = write_tmp(r#"{"alhpa": 0.25}"#);
        assert!(Config::load(f.path()).is_err());
    }

    #[test]
    fn validation_catches_out_of_range() {
        let c = Config {
            significance: 1.5,
            ..Config::default()
        };
        assert!(c.validate().is_err());
        let c = Config {
            n_samples: 10,
            ..Config::default()
        };
        assert!(c.validate().is_err());
        let c = Config {
            smoothing_epsilon: 1.0,
            ..Config::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn alpha_resolution_applies_overrides() {
        let schema = PropertySchema::new(vec![
            ("color".into(), vec!["r".into(), "b".into()]),
            ("size".into(), vec!["s".into(), "m".into()]),
        ])
        .unwrap();
        let mut c = Config::default();
        c.alpha_overrides.insert("size".into(), 0.75);
        assert_eq!(c.resolve_alphas(&schema).unwrap(), vec![0.5, 0.75]);
        c.alpha_overrides.insert("ghost".into(), 0.1);
        assert!(c.resolve_alphas(&schema).is_err());
    }
}
