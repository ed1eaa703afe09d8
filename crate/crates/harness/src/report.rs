//! Checks, artifacts and the JSON report of one experiment run.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// Acceptance rule for a single scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Threshold {
    AtMost { limit: f64 },
    AtLeast { limit: f64 },
    /// `|value − reference| ≤ tolerance·|reference|`
    Relative { reference: f64, tolerance: f64 },
    /// `|value − reference| ≤ tolerance`
    Absolute { reference: f64, tolerance: f64 },
    Range { lower: f64, upper: f64 },
}

impl Threshold {
    pub fn holds(&self, v: f64) -> bool {
        if !v.is_finite() {
            return false;
        }
        match *self {
            Self::AtMost { limit } => v <= limit,
            Self::AtLeast { limit } => v >= limit,
            Self::Relative { reference, tolerance } => (v - reference).abs() <= tolerance * reference.abs(),
            Self::Absolute { reference, tolerance } => (v - reference).abs() <= tolerance,
            Self::Range { lower, upper } => (lower..=upper).contains(&v),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Self::AtMost { limit } => format!("<= {limit:e}"),
            Self::AtLeast { limit } => format!(">= {limit:e}"),
            Self::Relative { reference, tolerance } => format!("within {tolerance} relative of {reference}"),
            Self::Absolute { reference, tolerance } => format!("within {tolerance:e} of {reference}"),
            Self::Range { lower, upper } => format!("in [{lower}, {upper}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Module invariant the check exercises.
    pub invariant: String,
    pub value: f64,
    pub threshold: Threshold,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub crate_version: String,
    pub threads: usize,
    pub unix_time_s: u64,
}

impl Environment {
    pub fn capture() -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            unix_time_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub environment: Environment,
    pub wall_time_s: f64,
    pub artifacts: Vec<String>,
    /// Regression values recorded by this run.
    pub frozen: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// What an experiment produces before it is written to disk.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub frozen: BTreeMap<String, f64>,
}

impl Outcome {
    pub fn check(&mut self, name: impl Into<String>, invariant: &str, value: f64, threshold: Threshold) {
        let pass = threshold.holds(value);
        self.checks.push(Check {
            name: name.into(),
            invariant: invariant.into(),
            value,
            threshold,
            pass,
        });
    }

    pub fn artifact(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.artifacts.push((name.into(), bytes));
    }

    pub fn freeze(&mut self, name: impl Into<String>, value: f64) {
        self.frozen.insert(name.into(), value);
    }
}

/// Text CSV cell, quoted so embedded commas survive.
pub fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Fixed-format float for CSV cells.
pub fn cell(v: f64) -> String {
    format!("{v:.10e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        assert!(Threshold::AtMost { limit: 1.0 }.holds(1.0));
        assert!(!Threshold::AtMost { limit: 1.0 }.holds(f64::NAN));
        assert!(Threshold::Relative { reference: -2.0, tolerance: 0.1 }.holds(-2.1));
        assert!(!Threshold::Range { lower: -1.3, upper: -0.7 }.holds(-1.36));
        assert!(Threshold::Absolute { reference: 0.5, tolerance: 1e-6 }.holds(0.5 + 5e-7));
    }

    #[test]
    fn report_roundtrips_through_json() {
        let mut o = Outcome::default();
        o.check("a", "inv", 0.5, Threshold::AtMost { limit: 1.0 });
        let r = ExperimentReport {
            experiment: "E0".into(),
            config: BTreeMap::new(),
            pass: o.checks.iter().all(|c| c.pass),
            checks: o.checks,
            environment: Environment::capture(),
            wall_time_s: 0.0,
            artifacts: vec![],
            frozen: BTreeMap::new(),
        };
        let back: ExperimentReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
