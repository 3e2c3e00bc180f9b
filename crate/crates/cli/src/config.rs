//! Run configuration: a TOML document with an explicit schema version.
//! Unknown keys anywhere are rejected.

use serde::{Deserialize, Serialize};

use scatlab::fields::FieldSpec;
use scatlab::wavesolver::Formulation;

use crate::error::CliError;
use crate::scenario::Expectation;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    /// Built-in scenario name, or `"custom"` together with a `[custom]` table.
    pub scenario: String,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub custom: Option<CustomScenario>,
    #[serde(default)]
    pub amplitude: AmplitudeConfig,
    #[serde(default)]
    pub carleman: CarlemanConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
}

impl Config {
    pub fn builtin(name: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: name.to_string(),
            grid: GridConfig::default(),
            custom: None,
            amplitude: AmplitudeConfig::default(),
            carleman: CarlemanConfig::default(),
            convergence: ConvergenceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub h: f64,
    pub t_sim: f64,
    /// Mollifier width in grid spacings.
    pub epsilon_cells: f64,
    /// Angular spacing of the boundary sampling.
    pub boundary_step: f64,
    pub formulation: Formulation,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            h: 1.0 / 64.0,
            t_sim: 3.0,
            epsilon_cells: 4.0,
            boundary_step: std::f64::consts::PI / 32.0,
            formulation: Formulation::SmoothPart,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomScenario {
    pub name: String,
    pub potentials: Vec<FieldSpec<f64>>,
    pub directions: Vec<Vec<f64>>,
    #[serde(default)]
    pub expectation: Expectation,
    /// Indices into the `±e_j` list flagged as a reduced data set.
    #[serde(default)]
    pub reduced: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmplitudeConfig {
    pub radii: Vec<f64>,
    pub n_theta: usize,
    /// Defaults to 16 frequencies in `[π, 4π]`.
    pub freqs: Option<Vec<f64>>,
    pub tail: f64,
    /// Damping `μ` of the trace-level derivative check; defaults to
    /// `r₀ + 1` for magnetic potentials and 1 otherwise.
    pub fourier_shift: Option<f64>,
}

impl Default for AmplitudeConfig {
    fn default() -> Self {
        Self {
            radii: vec![3.0, 4.0],
            n_theta: 16,
            freqs: None,
            tail: 1.9,
            fourier_shift: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarlemanConfig {
    pub lambda_w: f64,
    pub vartheta: Vec<f64>,
    pub horizon: f64,
    /// Horizon of the negative separation control.
    pub short_horizon: f64,
    pub kappa_sigmas: Vec<f64>,
    pub ratio_sigmas: Vec<f64>,
    pub margin_b: Vec<f64>,
    pub jets: usize,
    pub seed: u64,
}

impl Default for CarlemanConfig {
    fn default() -> Self {
        Self {
            lambda_w: 1.0,
            vartheta: vec![2.0, 0.0],
            horizon: 7.5,
            short_horizon: 3.0,
            kappa_sigmas: vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
            ratio_sigmas: vec![2.0, 4.0, 8.0, 16.0, 32.0],
            margin_b: (0..=20).map(|k| k as f64 / 2.0).collect(),
            jets: 1000,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    /// Refinement levels `L`, `h = 2^{−L}`; `None` picks 4, 5, 6 in two and
    /// three dimensions and 7, 8, 9 on the line.
    pub levels: Option<Vec<u32>>,
    /// Upper end of the near-front window (line scenarios).
    pub near_front_s_max: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            levels: None,
            near_front_s_max: 0.2,
        }
    }
}

/// Parses and checks the schema version.
pub fn parse_config(text: &str) -> Result<Config, CliError> {
    let cfg: Config = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        CliError::Config {
            line,
            message: e.message().to_string(),
        }
    })?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(CliError::Config {
            line: None,
            message: format!(
                "schema_version {} is not supported; expected {SCHEMA_VERSION}",
                cfg.schema_version
            ),
        });
    }
    Ok(cfg)
}
