//! The experiment catalog.

pub mod cauchy;
pub mod cgo;
pub mod density;
pub mod energy;
pub mod gauge;
pub mod heat;

use electrothermal::geometry::mesh::{H_MAX, H_MIN};
use electrothermal::geometry::{build_disk_mesh, Mesh};

use crate::config::{in_range, Config};
use crate::report::Outcome;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [Self::E1, Self::E2, Self::E3, Self::E4, Self::E5, Self::E6];

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.id() == id)
    }

    pub fn id(self) -> &'static str {
        match self {
            Self::E1 => "E1",
            Self::E2 => "E2",
            Self::E3 => "E3",
            Self::E4 => "E4",
            Self::E5 => "E5",
            Self::E6 => "E6",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Self::E1 => "gauge invariance of the voltage-to-heat-flow map under pushforward",
            Self::E2 => "energy recovery from long-time static heat flow",
            Self::E3 => "heat solver cross-validation and static flux oracles",
            Self::E4 => "CGO certification: residuals, expansion orders, remainder uniformity",
            Self::E5 => "density probe: projection residuals and orthogonalized decay",
            Self::E6 => "Cauchy transform closed forms and inverse properties",
        }
    }

    /// Whether the experiment records values for `freeze-baselines`.
    pub fn records_baseline(self) -> bool {
        self == Self::E5
    }

    /// Reads and validates all parameters without running anything.
    pub fn prepare(self, cfg: &Config) -> Result<Prepared, HarnessError> {
        Ok(match self {
            Self::E1 => Prepared::E1(gauge::Params::from_config(cfg)?),
            Self::E2 => Prepared::E2(energy::Params::from_config(cfg)?),
            Self::E3 => Prepared::E3(heat::Params::from_config(cfg)?),
            Self::E4 => Prepared::E4(cgo::Params::from_config(cfg)?),
            Self::E5 => Prepared::E5(density::Params::from_config(cfg)?),
            Self::E6 => Prepared::E6(cauchy::Params::from_config(cfg)?),
        })
    }
}

pub enum Prepared {
    E1(gauge::Params),
    E2(energy::Params),
    E3(heat::Params),
    E4(cgo::Params),
    E5(density::Params),
    E6(cauchy::Params),
}

impl Prepared {
    pub fn run(&self, out: &mut Outcome) -> Result<(), HarnessError> {
        match self {
            Self::E1(p) => gauge::run(p, out),
            Self::E2(p) => energy::run(p, out),
            Self::E3(p) => heat::run(p, out),
            Self::E4(p) => cgo::run(p, out),
            Self::E5(p) => density::run(p, out),
            Self::E6(p) => cauchy::run(p, out),
        }
    }
}

pub(crate) fn mesh_h(cfg: &Config, key: &str, default: f64) -> Result<f64, HarnessError> {
    in_range(key, cfg.parse_or(key, default)?, H_MIN, H_MAX)
}

pub(crate) fn mesh(h: f64) -> Result<Mesh, HarnessError> {
    Ok(build_disk_mesh(h)?)
}

/// Spectral resolution: a power of two in `[128, 4096]`.
pub(crate) fn spectral_n(cfg: &Config, default: usize) -> Result<usize, HarnessError> {
    let n: usize = cfg.parse_or("spectral_n", default)?;
    if !(128..=4096).contains(&n) || !n.is_power_of_two() {
        return Err(HarnessError::Config(format!(
            "spectral_n = {n} must be a power of two in [128, 4096]"
        )));
    }
    Ok(n)
}

pub(crate) fn spectral_l(cfg: &Config) -> Result<f64, HarnessError> {
    in_range("spectral_l", cfg.parse_or("spectral_l", electrothermal::cgo::DEFAULT_L)?, 2.0, 8.0)
}

pub(crate) fn count(cfg: &Config, key: &str, default: usize, lo: usize, hi: usize) -> Result<usize, HarnessError> {
    let v: usize = cfg.parse_or(key, default)?;
    if (lo..=hi).contains(&v) {
        Ok(v)
    } else {
        Err(HarnessError::Config(format!("key '{key}' = {v} outside [{lo}, {hi}]")))
    }
}

pub(crate) fn tol(cfg: &Config, key: &str, default: f64) -> Result<f64, HarnessError> {
    in_range(key, cfg.parse_or(key, default)?, 0.0, f64::MAX)
}

pub(crate) fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> Vec<u8> {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s.into_bytes()
}
