//! JSON job configurations for the subcommands, plus the named external
//! drift registry used by plain (non-interacting) simulations.
//!
//! Every config struct rejects unknown keys; parse errors carry the file
//! name and the line/column reported by the JSON parser.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mvlab::kernels::sign0;
use mvlab::linearize::DriftFn;
use mvlab::oracle::OracleDensity;
use mvlab::regularity::Exponent;
use mvlab::simulate::{DriftSpec, InitialLaw, SimConfig};

use crate::{CliError, CliResult};

/// Parse a JSON config file into `T` with file/line/column diagnostics.
pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

/// Parse a JSON config string; `origin` names the source in diagnostics.
pub fn parse_config<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

/// External drift fields available to `simulate` with a plain (external)
/// drift spec and to the oracle scenario. Applied coordinate-wise.
pub fn named_drift(name: &str) -> Option<fn(f64, [f64; 2]) -> [f64; 2]> {
    match name {
        "sign" => Some(|_t, x| [-sign0(x[0]), -sign0(x[1])]),
        "zero" => Some(|_t, _x| [0.0, 0.0]),
        "ou" => Some(|_t, x| [-x[0], -x[1]]),
        "tanh" => Some(|_t, x| [-x[0].tanh(), -x[1].tanh()]),
        _ => None,
    }
}

pub const NAMED_DRIFTS: &[&str] = &["sign", "zero", "ou", "tanh"];

/// Job for the `simulate` subcommand: a full run description plus the
/// initial law.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateJob {
    pub run: SimConfig,
    pub initial: InitialLaw,
}

impl SimulateJob {
    pub fn validate(&self) -> CliResult<()> {
        self.run.validate()?;
        self.initial.validate(self.run.dim)?;
        if let DriftSpec::External { name } = &self.run.drift {
            if named_drift(name).is_none() {
                return Err(CliError::Config(format!(
                    "unknown external drift {name:?}; known drifts: {}",
                    NAMED_DRIFTS.join(", ")
                )));
            }
        }
        Ok(())
    }
}

impl Default for SimulateJob {
    fn default() -> Self {
        SimulateJob {
            run: SimConfig {
                n_particles: 10_000,
                dim: 1,
                dt: 1e-3,
                t_end: 1.0,
                seed: 1,
                driver: mvlab::simulate::Driver::Brownian,
                drift: DriftSpec::MeanField {
                    kernel: mvlab::kernels::KernelClass::Sign,
                },
                backend: mvlab::simulate::Backend::GridFft {
                    half_width: 8.0,
                    cells: 1 << 12,
                },
                snapshot_times: vec![1.0],
            },
            initial: InitialLaw::Point {
                position: vec![0.0],
            },
        }
    }
}

/// Job for the `density` subcommand. With neither `bandwidth` nor
/// `silverman_factor` the output is the raw histogram; `bandwidth` sets the
/// KDE width directly, `silverman_factor` scales the plug-in rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityJob {
    /// Stem of a stored path record (`<stem>.bin` / `<stem>.json`).
    pub input: PathBuf,
    /// Snapshot time to use.
    pub time: f64,
    pub half_width: f64,
    pub cells: usize,
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default)]
    pub silverman_factor: Option<f64>,
}

impl DensityJob {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.half_width > 0.0) || self.cells == 0 {
            return Err(CliError::config("half_width and cells must be positive"));
        }
        if self.bandwidth.is_some() && self.silverman_factor.is_some() {
            return Err(CliError::config(
                "bandwidth and silverman_factor are mutually exclusive",
            ));
        }
        if let Some(b) = self.bandwidth {
            if !(b > 0.0) {
                return Err(CliError::config("bandwidth must be > 0"));
            }
        }
        if let Some(f) = self.silverman_factor {
            if !(f > 0.0) {
                return Err(CliError::config("silverman_factor must be > 0"));
            }
        }
        Ok(())
    }
}

/// Job for the `regularity` subcommand, run against a stored density.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityJob {
    /// Stem of a stored grid density.
    pub input: PathBuf,
    /// Block-norm integrability exponent.
    #[serde(default = "default_p")]
    pub p: Exponent,
    /// Seminorm smoothness parameter for the per-level table.
    #[serde(default = "default_s")]
    pub s: f64,
    /// Finite-difference order for the seminorm table.
    #[serde(default = "default_m")]
    pub m: u32,
    /// Locations for kink statistics (each must sit on the cell-edge lattice).
    #[serde(default)]
    pub kink_locations: Vec<f64>,
    #[serde(default = "default_scales")]
    pub kink_scales: Vec<f64>,
}

fn default_p() -> Exponent {
    Exponent::One
}
fn default_s() -> f64 {
    2.0
}
fn default_m() -> u32 {
    3
}
fn default_scales() -> Vec<f64> {
    vec![0.25, 0.5]
}

impl RegularityJob {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.s > 0.0 && (self.m as f64) > self.s) {
            return Err(CliError::config("need 0 < s < m for the seminorm table"));
        }
        if self.kink_scales.len() < 2 && !self.kink_locations.is_empty() {
            return Err(CliError::config("kink statistics need at least two scales"));
        }
        Ok(())
    }
}

/// Job for the `oracle` subcommand: materialize a closed-form density on a
/// grid, optionally comparing it with a stored density in L¹.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleJob {
    pub density: OracleDensity,
    pub half_width: f64,
    pub cells: usize,
    /// Stem of a stored density to compare against.
    #[serde(default)]
    pub compare: Option<PathBuf>,
}

impl OracleJob {
    pub fn validate(&self) -> CliResult<()> {
        self.density.validate()?;
        if !(self.half_width > 0.0) || self.cells == 0 {
            return Err(CliError::config("half_width and cells must be positive"));
        }
        Ok(())
    }
}

/// Job for the `linearize` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearizeJob {
    pub order: u8,
    pub drift: DriftFn,
    pub t: f64,
    /// Strictly decreasing gap sizes.
    pub epsilons: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
}

impl LinearizeJob {
    pub fn validate(&self) -> CliResult<()> {
        self.drift.validate()?;
        if self.order > 2 {
            return Err(CliError::config("order must be 0, 1, or 2"));
        }
        if !(self.t > 0.0) {
            return Err(CliError::config("t must be > 0"));
        }
        if self.epsilons.is_empty() {
            return Err(CliError::config("epsilons must be nonempty"));
        }
        if self.samples == 0 {
            return Err(CliError::config("samples must be positive"));
        }
        Ok(())
    }
}

/// Lower-bound table request inside a malliavin job.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundSpec {
    pub delta: f64,
    pub epsilons: Vec<f64>,
}

/// Job for the `malliavin` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MalliavinJob {
    pub drift: DriftFn,
    pub t: f64,
    pub dt: f64,
    /// Inverse-moment order.
    pub p: f64,
    pub samples: u64,
    pub seed: u64,
    #[serde(default)]
    pub lower_bound: Option<LowerBoundSpec>,
}

impl MalliavinJob {
    pub fn validate(&self) -> CliResult<()> {
        self.drift.validate()?;
        if !self.drift.has_gradient() {
            return Err(CliError::config(
                "malliavin jobs need a drift with a gradient; mollify the drift first",
            ));
        }
        if !(self.t > 0.0 && self.dt > 0.0) {
            return Err(CliError::config("t and dt must be > 0"));
        }
        if !(self.p >= 1.0) {
            return Err(CliError::config("p must be >= 1"));
        }
        if self.samples < 2 {
            return Err(CliError::config("samples must be at least 2"));
        }
        Ok(())
    }
}

/// Top-level experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    /// Scenario-specific parameters; missing keys take scenario defaults.
    #[serde(default = "empty_object")]
    pub parameters: serde_json::Value,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Overrides the `--out`/`MVLAB_OUT` output root for this experiment.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub resources: crate::artifacts::ResourceCaps,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: String::new(),
            parameters: empty_object(),
            seed: default_seed(),
            output_dir: None,
            resources: crate::artifacts::ResourceCaps::default(),
        }
    }
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(serde_json::Map::new())
}

fn default_seed() -> u64 {
    1
}
