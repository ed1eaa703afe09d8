//! Batch runner for the named experiments E1–E6.
//!
//! An experiment reads a flat [`Config`], produces checks and CSV artifacts,
//! and writes `report.json` into its output directory. Experiments that
//! record regression values can freeze them into `baselines_dir/<id>.json`;
//! later runs compare against the frozen file.

pub mod catalog;
pub mod config;
pub mod experiments;
pub mod report;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::Config;
pub use experiments::Experiment;
pub use report::{Check, ExperimentReport, Outcome, Threshold};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("unknown experiment '{0}' (expected one of E1..E6)")]
    UnknownExperiment(String),

    #[error("baseline error: {0}")]
    Baseline(String),

    #[error("numeric failure: {0}")]
    Numeric(#[from] electrothermal::Error),

    #[error("refusing to freeze baselines: {0} check(s) failed")]
    FreezeRefused(usize),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::UnknownExperiment(_) | Self::Baseline(_) => 2,
            Self::Numeric(_) | Self::FreezeRefused(_) | Self::Io(_) => 3,
        }
    }
}

/// Process exit code for a finished run.
pub fn exit_code(result: &Result<ExperimentReport, HarnessError>) -> i32 {
    match result {
        Ok(r) if r.pass => 0,
        Ok(_) => 3,
        Err(e) => e.exit_code(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Freeze,
}

/// Keys that do not influence the numbers and may differ from the frozen run.
const PLUMBING_KEYS: [&str; 3] = ["output_dir", "baselines_dir", "check_baseline"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub experiment: String,
    pub config: BTreeMap<String, String>,
    pub values: BTreeMap<String, f64>,
}

impl Baseline {
    pub fn path(dir: &Path, exp: Experiment) -> PathBuf {
        dir.join(format!("{}.json", exp.id()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Baseline(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Baseline(format!("{}: {e}", path.display())))
    }
}

fn numeric_config(cfg: &Config) -> BTreeMap<String, String> {
    cfg.entries()
        .iter()
        .filter(|(k, _)| !PLUMBING_KEYS.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

fn compare_with_baseline(base: &Baseline, cfg: &Config, out: &mut Outcome) -> Result<(), HarnessError> {
    let current = numeric_config(cfg);
    if base.config != current {
        let keys: Vec<&String> = base
            .config
            .keys()
            .chain(current.keys())
            .filter(|k| base.config.get(*k) != current.get(*k))
            .collect();
        return Err(HarnessError::Baseline(format!(
            "baseline was frozen with a different configuration (keys {keys:?}); re-freeze or set check_baseline = false"
        )));
    }
    if base.values.keys().ne(out.frozen.keys()) {
        return Err(HarnessError::Baseline("baseline records a different set of values".into()));
    }
    for (name, &reference) in &base.values {
        let value = out.frozen[name];
        out.check(
            format!("baseline:{name}"),
            "frozen regression value reproduced",
            value,
            Threshold::Absolute {
                reference,
                tolerance: BASELINE_TOL,
            },
        );
    }
    Ok(())
}

/// Absolute tolerance for reproducing frozen values.
pub const BASELINE_TOL: f64 = 1e-6;

/// Exclusive claim on an output directory, released on drop.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self, HarnessError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".etlab.lock");
        OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            HarnessError::Config(format!("output directory {} is in use ({e})", dir.display()))
        })?;
        Ok(Self { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Runs the experiment named by `cfg` and writes its artifacts and report.
pub fn execute(cfg: &Config, mode: Mode) -> Result<ExperimentReport, HarnessError> {
    let id = cfg.required("experiment")?;
    let exp = Experiment::from_id(&id).ok_or(HarnessError::UnknownExperiment(id))?;
    let output_dir = cfg.path_or("output_dir", &format!("out/{}", exp.id()));
    let baselines_dir = cfg.path_or("baselines_dir", "baselines");
    let check_baseline: bool = cfg.parse_or("check_baseline", exp.records_baseline())?;
    let prepared = exp.prepare(cfg)?;
    cfg.finish()?;

    let baseline = match mode {
        Mode::Freeze if !exp.records_baseline() => {
            return Err(HarnessError::Config(format!("{} records no baseline values", exp.id())));
        }
        Mode::Run if check_baseline && exp.records_baseline() => {
            Some(Baseline::load(&Baseline::path(&baselines_dir, exp))?)
        }
        _ => None,
    };

    let _lock = DirLock::acquire(&output_dir)?;
    let start = Instant::now();
    let mut out = Outcome::default();
    prepared.run(&mut out)?;
    if let Some(base) = &baseline {
        compare_with_baseline(base, cfg, &mut out)?;
    }
    let wall_time_s = start.elapsed().as_secs_f64();

    let mut artifacts = Vec::new();
    for (name, bytes) in &out.artifacts {
        fs::write(output_dir.join(name), bytes)?;
        artifacts.push(name.clone());
    }
    let report = ExperimentReport {
        experiment: exp.id().into(),
        config: cfg.entries().clone(),
        pass: out.checks.iter().all(|c| c.pass),
        checks: out.checks,
        environment: report::Environment::capture(),
        wall_time_s,
        artifacts,
        frozen: out.frozen,
    };
    serde_json::to_writer_pretty(File::create(output_dir.join("report.json"))?, &report)
        .map_err(std::io::Error::from)?;

    if mode == Mode::Freeze {
        let failed = report.failed_checks().count();
        if failed > 0 {
            return Err(HarnessError::FreezeRefused(failed));
        }
        let base = Baseline {
            experiment: exp.id().into(),
            config: numeric_config(cfg),
            values: report.frozen.clone(),
        };
        fs::create_dir_all(&baselines_dir)?;
        let text = serde_json::to_string_pretty(&base).map_err(std::io::Error::from)?;
        fs::write(Baseline::path(&baselines_dir, exp), text + "\n")?;
    }
    Ok(report)
}

/// Loads a config file and applies `key=value` overrides in order.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<Config, HarnessError> {
    let mut cfg = Config::load(path)?;
    for o in overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}
