//! Experiment configuration files.

use serde::{Deserialize, Serialize};

use qgids_core::conditions::ConditionSpec;
use qgids_core::ids::{CountingMethod, MagneticKind};
use qgids_core::random::EnsembleConfig;
use qgids_core::spectral::potential::PotentialSpec;
use qgids_core::spectral::Discretization;

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;
/// Largest number of grid points accepted in a config.
pub const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(flatten)]
    pub experiment: Experiment,
    #[serde(default)]
    pub discretization: Discretization,
    /// File name stem for the outputs; defaults to the experiment kind.
    #[serde(default)]
    pub output: Option<String>,
}

/// A grid of energies: either a uniform range or explicit points.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridConfig {
    Range { min: f64, max: f64, step: f64 },
    Points { points: Vec<f64> },
}

impl GridConfig {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let pts = match self {
            GridConfig::Range { min, max, step } => {
                if !(min.is_finite() && max.is_finite() && min <= max && *step > 0.0) {
                    return Err(CliError::Validation(format!(
                        "grid needs finite min <= max and a positive step, got [{min}, {max}] step {step}"
                    )));
                }
                let n = ((max - min) / step + 1e-9).floor();
                if n >= MAX_GRID_POINTS as f64 {
                    return Err(CliError::Validation(format!("grid has more than {MAX_GRID_POINTS} points")));
                }
                (0..=n as usize).map(|i| min + i as f64 * step).collect()
            }
            GridConfig::Points { points } => {
                if points.is_empty() || points.len() > MAX_GRID_POINTS || points.iter().any(|x| !x.is_finite()) {
                    return Err(CliError::Validation("grid points must be finite and nonempty".into()));
                }
                let mut p = points.clone();
                p.sort_by(f64::total_cmp);
                p
            }
        };
        Ok(pts)
    }
}

/// A finite graph for `solve`: the anchored graph of a set of sites.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub d: usize,
    /// Cube side; ignored when `sites` is given.
    #[serde(default)]
    pub cube: Option<usize>,
    #[serde(default)]
    pub sites: Option<Vec<Vec<i64>>>,
    /// Condition at vertices with a complete star of `2d` edges.
    #[serde(default = "kirchhoff")]
    pub condition: ConditionSpec,
    /// Condition at the remaining vertices.
    #[serde(default = "dirichlet")]
    pub boundary_condition: ConditionSpec,
    #[serde(default = "zero_potential")]
    pub potential: PotentialSpec,
    /// End phases per edge in the canonical edge order.
    #[serde(default)]
    pub phases: Option<Vec<f64>>,
}

fn kirchhoff() -> ConditionSpec {
    ConditionSpec::Kirchhoff
}

fn dirichlet() -> ConditionSpec {
    ConditionSpec::Dirichlet
}

fn zero_potential() -> PotentialSpec {
    PotentialSpec::Constant(0.0)
}

fn default_trials() -> usize {
    200
}

fn default_magnetic_trials() -> usize {
    50
}

fn default_fluxes() -> Vec<f64> {
    vec![0.0, std::f64::consts::PI]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Solve {
        graph: GraphConfig,
        lambda: GridConfig,
    },
    Ids {
        d: usize,
        ensemble: EnsembleConfig,
        side: usize,
        seed: u64,
        lambda: GridConfig,
        #[serde(default)]
        method: CountingMethod,
    },
    Converge {
        d: usize,
        ensemble: EnsembleConfig,
        sides: Vec<usize>,
        seed: u64,
        range: [f64; 2],
        #[serde(default)]
        method: CountingMethod,
        /// Compare with the closed form; defaults to on for one-dimensional
        /// site percolation.
        #[serde(default)]
        oracle: Option<bool>,
    },
    Percolation {
        p: f64,
        lambda: GridConfig,
        #[serde(default)]
        truncation: Option<usize>,
    },
    SsfCheck {
        d: usize,
        side: usize,
        #[serde(default = "default_trials")]
        trials: usize,
        seed: u64,
        lambda: GridConfig,
    },
    Ergodic {
        d: usize,
        ensemble: EnsembleConfig,
        sides: Vec<usize>,
        big_side: usize,
        seed: u64,
        lambda: GridConfig,
        /// Side of the cube whose normalized shift serves as reference.
        #[serde(default)]
        reference_side: Option<usize>,
        #[serde(default)]
        method: CountingMethod,
    },
    Magnetic {
        experiment: MagneticKind,
        #[serde(default = "default_magnetic_trials")]
        trials: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_fluxes")]
        fluxes: Vec<f64>,
        lambda: GridConfig,
    },
    PasturShubin {
        d: usize,
        ensemble: EnsembleConfig,
        inner_side: usize,
        outer_side: usize,
        /// Corner of the inner cube; centered when absent.
        #[serde(default)]
        inner_offset: Option<Vec<i64>>,
        seeds: Vec<u64>,
        lambda: GridConfig,
        #[serde(default)]
        method: CountingMethod,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Solve { .. } => "solve",
            Experiment::Ids { .. } => "ids",
            Experiment::Converge { .. } => "converge",
            Experiment::Percolation { .. } => "percolation",
            Experiment::SsfCheck { .. } => "ssf-check",
            Experiment::Ergodic { .. } => "ergodic",
            Experiment::Magnetic { .. } => "magnetic",
            Experiment::PasturShubin { .. } => "pastur-shubin",
        }
    }
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config is not valid JSON: {e}")))?;
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == CONFIG_VERSION as u64 => {}
        Some(v) => return Err(CliError::Validation(format!("unsupported config version {v}"))),
        None => return Err(CliError::Validation("config needs an integer \"version\"".into())),
    }
    let config: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| CliError::Validation(format!("invalid config: {e}")))?;
    config
        .discretization
        .check()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if let Some(stem) = &config.output {
        if stem.is_empty() || stem.contains(['/', '\\']) || stem.starts_with('.') {
            return Err(CliError::Validation(format!("bad output name {stem:?}")));
        }
    }
    Ok(config)
}
