//! Experiment configuration files.

use std::collections::BTreeMap;
use std::path::PathBuf;

use dimer_core::gff::TestFunction;
use dimer_core::sampler::Algorithm;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Exact,
    Montecarlo,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    Small,
    Full,
}

/// Everything needed to reproduce a run. Unknown fields are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Lattice sizes `N`; the region is the unit square at spacing `1/N`.
    #[serde(default = "default_sizes")]
    pub sizes: Vec<i32>,
    /// Samples per size (one entry, or one per size).
    #[serde(default = "default_samples")]
    pub samples: Vec<usize>,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    /// Continuum points whose heights are tracked; covariances are reported for all pairs.
    #[serde(default = "default_points")]
    pub points: Vec<[f64; 2]>,
    /// `eigen:j,k` or `bump:x,y,r`.
    #[serde(default = "default_functions")]
    pub test_functions: Vec<String>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub render: bool,
    /// Acceptance suite to run alongside the experiment, if any.
    #[serde(default)]
    pub suite: Option<Suite>,
    #[serde(default = "default_budget")]
    pub budget: Budget,
    /// Per-criterion tolerance overrides keyed by criterion id.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

fn default_sizes() -> Vec<i32> {
    vec![21, 41]
}

fn default_samples() -> Vec<usize> {
    vec![2000]
}

fn default_algorithm() -> Algorithm {
    Algorithm::Wilson
}

fn default_points() -> Vec<[f64; 2]> {
    vec![[0.25, 0.5], [0.75, 0.5]]
}

fn default_functions() -> Vec<String> {
    vec!["eigen:1,1".into()]
}

fn default_budget() -> Budget {
    Budget::Small
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.sizes.iter().any(|&n| n < 3 || n % 2 == 0) {
            return Err(CliError::Usage("sizes must be odd and at least 3".into()));
        }
        if self.samples.is_empty() || (self.samples.len() != 1 && self.samples.len() != self.sizes.len()) {
            return Err(CliError::Usage("samples needs one entry or one per size".into()));
        }
        if self.samples.iter().any(|&s| s < 2) {
            return Err(CliError::Usage("at least 2 samples per size".into()));
        }
        if self.points.iter().any(|p| !(p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0)) {
            return Err(CliError::Usage("points must lie inside the unit square".into()));
        }
        for f in &self.test_functions {
            parse_test_function(f)?;
        }
        Ok(())
    }

    pub fn samples_for(&self, index: usize) -> usize {
        if self.samples.len() == 1 {
            self.samples[0]
        } else {
            self.samples[index]
        }
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| Complex64::new(p[0], p[1])).collect()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serialization cannot fail");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn parse_test_function(spec: &str) -> Result<TestFunction, CliError> {
    let bad = || CliError::Usage(format!("bad test function {spec:?}; expected eigen:j,k or bump:x,y,r"));
    let (kind, args) = spec.split_once(':').ok_or_else(bad)?;
    match kind {
        "eigen" => {
            let v: Vec<u32> = args.split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
            match v[..] {
                [j, k] if j > 0 && k > 0 => Ok(TestFunction::Eigen { j, k }),
                _ => Err(bad()),
            }
        }
        "bump" => {
            let v: Vec<f64> = args.split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
            match v[..] {
                [x, y, r] if r > 0.0 => Ok(TestFunction::Bump { center: Complex64::new(x, y), radius: r }),
                _ => Err(bad()),
            }
        }
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_hash() {
        let a = ExperimentConfig::from_json(r#"{"seed": 7}"#).unwrap();
        assert_eq!(a.sizes, vec![21, 41]);
        let b = ExperimentConfig::from_json(r#"{"seed": 7, "sizes": [21, 41]}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::from_json(r#"{"seed": 8}"#).unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"sizes": [21]}"#,
            r#"{"seed": 1, "sizes": [20]}"#,
            r#"{"seed": 1, "colour": "red"}"#,
            r#"{"seed": 1, "test_functions": ["wave:1"]}"#,
            r#"{"seed": 1, "points": [[1.5, 0.5]]}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(text), Err(CliError::Usage(_))), "{text}");
        }
    }

    #[test]
    fn test_function_specs() {
        assert!(matches!(parse_test_function("eigen:1,2"), Ok(TestFunction::Eigen { j: 1, k: 2 })));
        assert!(matches!(parse_test_function("bump:0.5,0.5,0.2"), Ok(TestFunction::Bump { .. })));
        assert!(parse_test_function("eigen:0,1").is_err());
    }
}
