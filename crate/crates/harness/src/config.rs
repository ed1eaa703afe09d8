//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are
//! lowercase identifiers; values run to the end of the line. Every key
//! present must be consumed by the selected experiment, so misspelled keys
//! are reported instead of silently ignored.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::HarnessError;

#[derive(Debug, Clone)]
pub struct Config {
    entries: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

fn config_error(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn check_key(key: &str) -> Result<(), HarnessError> {
    let valid = !key.is_empty()
        && key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        && key.starts_with(|c: char| c.is_ascii_lowercase());
    if valid {
        Ok(())
    } else {
        Err(config_error(format!("invalid key '{key}'")))
    }
}

fn split_entry(line: &str) -> Result<(String, String), HarnessError> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| config_error(format!("expected key = value, got '{line}'")))?;
    let (k, v) = (k.trim(), v.trim());
    check_key(k)?;
    if v.is_empty() {
        return Err(config_error(format!("key '{k}' has an empty value")));
    }
    Ok((k.to_string(), v.to_string()))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split_entry(line).map_err(|e| config_error(format!("line {}: {e}", n + 1)))?;
            if entries.insert(k.clone(), v).is_some() {
                return Err(config_error(format!("line {}: duplicate key '{k}'", n + 1)));
            }
        }
        Ok(Self {
            entries,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies `key=value`, replacing any existing entry.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), HarnessError> {
        let (k, v) = split_entry(spec).map_err(|e| config_error(format!("override: {e}")))?;
        self.entries.insert(k, v);
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(String::as_str)
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    pub fn required(&self, key: &str) -> Result<String, HarnessError> {
        self.raw(key)
            .map(str::to_string)
            .ok_or_else(|| config_error(format!("missing required key '{key}'")))
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, HarnessError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| config_error(format!("key '{key}': cannot parse '{v}'"))),
        }
    }

    /// Comma-separated numbers.
    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, HarnessError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => parse_numbers(v).map_err(|e| config_error(format!("key '{key}': {e}"))),
        }
    }

    pub fn path_or(&self, key: &str, default: &str) -> PathBuf {
        PathBuf::from(self.str_or(key, default))
    }

    /// Fails on keys no experiment parameter consumed.
    pub fn finish(&self) -> Result<(), HarnessError> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .entries
            .keys()
            .filter(|k| !used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(config_error(format!("unknown keys: {}", unknown.join(", "))))
        }
    }
}

pub fn parse_numbers(v: &str) -> Result<Vec<f64>, String> {
    v.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().map_err(|_| format!("'{s}' is not a number"))
        })
        .collect()
}

/// Checks `lo ≤ v ≤ hi` for a finite `v`.
pub fn in_range(key: &str, v: f64, lo: f64, hi: f64) -> Result<f64, HarnessError> {
    if v.is_finite() && v >= lo && v <= hi {
        Ok(v)
    } else {
        Err(config_error(format!("key '{key}' = {v} outside [{lo}, {hi}]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut c = Config::parse("# header\nexperiment = E2\n\nmesh_h = 0.05\n").unwrap();
        c.apply_override("mesh_h=0.1").unwrap();
        assert_eq!(c.required("experiment").unwrap(), "E2");
        assert_eq!(c.parse_or("mesh_h", 0.0).unwrap(), 0.1);
        c.finish().unwrap();
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(Config::parse("mesh_h 0.05").is_err());
        assert!(Config::parse("a = 1\na = 2").is_err());
        assert!(Config::parse("Mesh = 1").is_err());
        assert!(Config::parse("a =").is_err());
        let c = Config::parse("a = x").unwrap();
        assert!(c.parse_or("a", 1.0).is_err());
    }

    #[test]
    fn unconsumed_keys_are_errors() {
        let c = Config::parse("experiment = E1\nmesh_hh = 0.1").unwrap();
        c.required("experiment").unwrap();
        assert!(matches!(c.finish(), Err(HarnessError::Config(m)) if m.contains("mesh_hh")));
    }

    #[test]
    fn number_lists() {
        assert_eq!(parse_numbers("10, 15,20").unwrap(), vec![10.0, 15.0, 20.0]);
        assert!(parse_numbers("1,,2").is_err());
    }
}
