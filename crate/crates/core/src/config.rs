//! JSON experiment configuration with strict key checking.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::{check_epsilons, ComparisonConfig, MIN_Z_SAMPLES};
use crate::approximation::InitialData;
use crate::spectral::{GridPolicy, Params};

/// A configuration problem, located by its JSON path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config at `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IllposedConfig {
    /// `|k|²` of the demonstrated mode; defaults to `ω² + 1` (growth rate 1).
    pub k_sq: Option<f64>,
    pub z_max: f64,
    pub samples: usize,
}

impl Default for IllposedConfig {
    fn default() -> Self {
        Self {
            k_sq: None,
            z_max: 10.0,
            samples: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub z: f64,
    pub steps: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { z: 10.0, steps: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub omega: f64,
    #[serde(rename = "Z0")]
    pub z0: f64,
    pub s: u32,
    #[serde(rename = "sA")]
    pub s_a: u32,
    pub epsilons: Vec<f64>,
    /// ε for single-run commands; defaults to the first entry of `epsilons`.
    pub epsilon: Option<f64>,
    pub data: InitialData,
    pub grid: GridPolicy,
    pub z_sample_count: usize,
    pub lattice_points: usize,
    pub lattice_half_width: f64,
    pub illposed: IllposedConfig,
    pub oracle: OracleConfig,
    pub out_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            z0: 1.0,
            s: 0,
            s_a: 4,
            epsilons: vec![0.2, 0.1, 0.05, 0.025],
            epsilon: None,
            data: InitialData::gaussian(1.0),
            grid: GridPolicy::default(),
            z_sample_count: 64,
            lattice_points: 65,
            lattice_half_width: 5.0,
            illposed: IllposedConfig::default(),
            oracle: OracleConfig::default(),
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn run_epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(self.epsilons[0])
    }

    /// Parameters at `epsilon`.
    pub fn params(&self, epsilon: f64) -> Params {
        Params {
            omega: self.omega,
            k_z: self.omega,
            epsilon,
            z0: self.z0,
            s: self.s,
            s_a: self.s_a,
        }
    }

    pub fn comparison(&self) -> ComparisonConfig {
        ComparisonConfig {
            policy: self.grid,
            z_sample_count: self.z_sample_count,
            lattice_points: self.lattice_points,
            lattice_half_width: self.lattice_half_width,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(err("omega", "omega must be positive"));
        }
        if !(self.z0.is_finite() && self.z0 > 0.0) {
            return Err(err("Z0", "Z0 must be positive"));
        }
        if self.s_a < self.s.max(4) {
            return Err(err(
                "sA",
                format!("sA must be ≥ max(4,s), got sA = {} with s = {}", self.s_a, self.s),
            ));
        }
        for (i, &eps) in self.epsilons.iter().enumerate() {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(err(&format!("epsilons[{i}]"), "epsilon must lie in (0, 1)"));
            }
        }
        check_epsilons(&self.epsilons).map_err(|e| err("epsilons", e.to_string()))?;
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(err("epsilon", "epsilon must lie in (0, 1)"));
            }
        }
        if let Err(e) = self.data.validate(self.s_a) {
            let path = match self.data {
                InitialData::Gaussian { .. } => "data.sigma",
                InitialData::Algebraic { .. } => "data.p",
            };
            let message = match self.data {
                InitialData::Algebraic { p, .. } if p.is_finite() && p <= self.s_a as f64 + 1.0 => {
                    format!("p must exceed sA+1 = {}, got {p}", self.s_a + 1)
                }
                _ => e.to_string(),
            };
            return Err(err(path, message));
        }
        if !(self.grid.cells_per_epsilon >= 4.0) {
            return Err(err("grid.cells_per_epsilon", "cells_per_epsilon must be ≥ 4"));
        }
        if !(self.grid.k_max_factor > std::f64::consts::FRAC_1_SQRT_2) {
            return Err(err(
                "grid.k_max_factor",
                "k_max_factor must exceed 1/√2 so the grid covers the cutoff",
            ));
        }
        if self.z_sample_count < MIN_Z_SAMPLES {
            return Err(err(
                "z_sample_count",
                format!("z_sample_count must be ≥ {MIN_Z_SAMPLES}, got {}", self.z_sample_count),
            ));
        }
        if self.lattice_points < 2 {
            return Err(err("lattice_points", "lattice_points must be ≥ 2"));
        }
        if !(self.lattice_half_width > 0.0) {
            return Err(err("lattice_half_width", "lattice_half_width must be positive"));
        }
        if let Some(k_sq) = self.illposed.k_sq {
            if !(k_sq > self.omega * self.omega) {
                return Err(err("illposed.k_sq", "k_sq must exceed omega² (elliptic mode)"));
            }
        }
        if self.illposed.samples < 2 || !(self.illposed.z_max > 0.0) {
            return Err(err("illposed", "need samples ≥ 2 and z_max > 0"));
        }
        if self.oracle.steps == 0 || !(self.oracle.z > 0.0) {
            return Err(err("oracle", "need steps ≥ 1 and z > 0"));
        }
        Ok(())
    }
}

/// Parses and validates a JSON configuration, applying defaults for absent keys.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

/// Schema and defaults, printed by `--help`.
pub const SCHEMA_HELP: &str = r#"CONFIG (JSON; every key optional, unknown keys rejected):
  omega               angular frequency ω > 0; k_z = ω          [1.0]
  Z0                  slow horizon Z₀ > 0                        [1.0]
  s                   measurement Sobolev index                  [0]
  sA                  data regularity index, sA ≥ max(4, s)      [4]
  epsilons            ≥ 3 geometric values in (0, 1)             [0.2, 0.1, 0.05, 0.025]
  epsilon             ε for run / energy-trace                   [first of epsilons]
  data                {"kind":"gaussian","sigma":σ,"amplitude":a}
                      {"kind":"algebraic","p":p,"amplitude":a}, p > sA+1
                                                                 [gaussian, σ = 1, a = 1]
  grid                {"cells_per_epsilon":10,"k_max_factor":2,"max_nodes":16777216}
  z_sample_count      samples of z ∈ [0, Z0/ε²], ≥ 16            [64]
  lattice_points      sup-norm lattice points per axis           [65]
  lattice_half_width  lattice half-width in slow units           [5.0]
  illposed            {"k_sq": ω²+1, "z_max": 10, "samples": 11}
  oracle              {"z": 10, "steps": 10000}
  out_dir             output directory                           [.]

OUTPUTS:
  sweep.csv    epsilon,sup_error_hs,z_at_sup,sup_error_inf,tail_norm,energy_ratio
  energy.csv   z,E,dE_fd,bound_rhs
  samples.csv  z,error_hs,error_inf,r_l2,r_hs,E,tail
  tail.csv     epsilon,tail_norm
  illposed.csv z,amplitude,predicted
  summary.json every report, fit and verdict

EXIT CODES: 0 success, 2 config error, 3 verdict failure, 4 runtime/resource error"#;
