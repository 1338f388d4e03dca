//! Run manifests: what was run, with which seeds, and how every check came out.

use std::path::Path;

use serde::{Deserialize, Serialize};

/// Outcome of one acceptance check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub name: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    /// How `measured` is compared: `abs_le` means `|measured - target| <= tolerance`,
    /// `le` means `measured <= tolerance`, `gt` means `measured > tolerance`.
    pub comparison: String,
    pub error_estimate: Option<f64>,
    pub runtime_limit: Option<f64>,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckRecord {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>3} {:<34} measured={:<12.6e} target={:<12.6e} tol={:<10.3e} {:>8.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.target,
            self.tolerance,
            self.seconds,
            self.detail
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub checks: Vec<CheckRecord>,
    pub artifacts: Vec<String>,
    pub wall_seconds: f64,
}

impl RunManifest {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialization cannot fail");
        std::fs::write(path, text + "\n")
    }
}
