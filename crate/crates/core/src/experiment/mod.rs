//! Reproduction harness: experiment configuration and presets, deadline
//! calibration, the end-to-end run and report export.

mod calibrate;
mod export;
mod run;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{calibrated_gamma_max, noise_power_watts, NetworkConfig, MBIT};
use crate::error::{Error, Result};
use crate::profile::TargetProfile;

pub use calibrate::{calibrate_dmax, calibrate_dmax_with, Calibration};
pub use export::{
    export_report, format_sig9, optimizer_csv, profiles_csv, read_report, BASELINE_CSV,
    OPTIMIZER_CSV, PROFILES_CSV, REPORT_JSON,
};
pub use run::{run_experiment, ExperimentReport, ScaleCheck, Timings};

pub const PRESETS: [&str; 4] = ["fig1-small", "fig1-large", "fig2-8arms-small", "fig2-8arms"];

/// Network parameters as written in config files. Task sizes are in Mbit;
/// an absent `gamma_max` is calibrated from the power and interference
/// levels, and an absent `deadline` is calibrated by simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkParams {
    pub agents: usize,
    pub servers: usize,
    pub bandwidth: f64,
    pub cpu_rate: f64,
    pub cycles_per_bit: f64,
    pub result_ratio: f64,
    pub downlink_divisor: f64,
    pub tx_power: f64,
    pub noise_power: f64,
    pub interference_min: f64,
    pub interference_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_max: Option<f64>,
    pub size_min_mbit: f64,
    pub size_max_mbit: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_mean_mbit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_std_mbit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<f64>,
    pub continuation: f64,
}

impl NetworkParams {
    pub fn paper(agents: usize, servers: usize) -> Self {
        Self {
            agents,
            servers,
            bandwidth: 10.0e6,
            cpu_rate: 4.0e9,
            cycles_per_bit: 100.0,
            result_ratio: 0.1,
            downlink_divisor: 10.0,
            tx_power: 0.2,
            noise_power: noise_power_watts(),
            interference_min: 0.008,
            interference_max: 0.012,
            gamma_max: None,
            size_min_mbit: 0.5,
            size_max_mbit: 1.0,
            size_mean_mbit: None,
            size_std_mbit: None,
            deadline: None,
            continuation: 0.95,
        }
    }

    /// Converts to the internal (bit-based) form. When the deadline is not
    /// pinned, `fallback_deadline` is used.
    pub fn resolve(&self, fallback_deadline: f64) -> Result<NetworkConfig> {
        let size_min = self.size_min_mbit * MBIT;
        let size_max = self.size_max_mbit * MBIT;
        let cfg = NetworkConfig {
            agents: self.agents,
            servers: self.servers,
            bandwidth: self.bandwidth,
            cpu_rate: self.cpu_rate,
            cycles_per_bit: self.cycles_per_bit,
            result_ratio: self.result_ratio,
            downlink_divisor: self.downlink_divisor,
            tx_power: self.tx_power,
            noise_power: self.noise_power,
            interference_min: self.interference_min,
            interference_max: self.interference_max,
            gamma_max: self.gamma_max.unwrap_or_else(|| {
                calibrated_gamma_max(self.tx_power, self.interference_min, self.noise_power)
            }),
            size_min,
            size_max,
            size_mean: self
                .size_mean_mbit
                .map_or(0.5 * (size_min + size_max), |x| x * MBIT),
            size_std: self
                .size_std_mbit
                .map_or((size_max - size_min) / 4.0, |x| x * MBIT),
            deadline: self.deadline.unwrap_or(fallback_deadline),
            continuation: self.continuation,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    /// CSV series plus `report.json`.
    #[default]
    Csv,
    /// `report.json` only.
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidConfig(format!(
                "unknown output format `{other}`"
            ))),
        }
    }
}

fn default_probe_rounds() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Preset this configuration came from, or a free-form label.
    pub name: String,
    pub network: NetworkParams,
    pub target: Vec<f64>,
    /// Rounds per simulation, `T`.
    pub rounds: usize,
    /// Trailing rounds averaged into a measured profile.
    pub window: usize,
    /// Optimizer iterations, `K`.
    pub iterations: usize,
    pub step_size: f64,
    pub seed: u64,
    #[serde(default = "default_probe_rounds")]
    pub probe_rounds: usize,
    /// Early-stop threshold on the 10-iteration moving average of the
    /// objective; absent means run all `iterations`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_below: Option<f64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

/// Target profile used by the published experiments for `arms` servers.
pub fn default_target(arms: usize) -> Option<Vec<f64>> {
    match arms {
        2 => Some(vec![0.2, 0.8]),
        8 => Some(vec![0.07, 0.08, 0.09, 0.10, 0.11, 0.12, 0.13, 0.30]),
        _ => None,
    }
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let (agents, servers) = match name {
            "fig1-small" => (100, 2),
            "fig1-large" => (10_000, 2),
            "fig2-8arms-small" => (100, 8),
            "fig2-8arms" => (10_000, 8),
            other => return Err(Error::UnknownPreset(other.to_string())),
        };
        Ok(Self {
            name: name.to_string(),
            network: NetworkParams::paper(agents, servers),
            target: default_target(servers).expect("presets use published arm counts"),
            rounds: 300,
            window: 50,
            iterations: 150,
            step_size: 0.5,
            seed: 1,
            probe_rounds: default_probe_rounds(),
            stop_below: Some(1e-4),
            output_dir: PathBuf::from("out").join(name),
            format: OutputFormat::Csv,
        })
    }

    /// Reads a TOML or JSON config file (chosen by extension, TOML otherwise).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Changes the agent count.
    pub fn with_agents(mut self, agents: usize) -> Self {
        self.network.agents = agents;
        self
    }

    /// Changes the server count, switching to the published target for
    /// that count.
    pub fn with_arms(mut self, arms: usize) -> Result<Self> {
        let target = default_target(arms).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "no default target profile for {arms} servers; use a config file"
            ))
        })?;
        self.network.servers = arms;
        self.target = target;
        Ok(self)
    }

    pub fn target_profile(&self) -> Result<TargetProfile> {
        TargetProfile::new(self.target.clone())
    }

    pub fn validate(&self) -> Result<()> {
        self.network.resolve(1.0)?;
        if self.target.len() != self.network.servers {
            return Err(Error::DimensionMismatch {
                expected: self.network.servers,
                got: self.target.len(),
            });
        }
        self.target_profile()?;
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if self.window == 0 || self.window > self.rounds {
            return Err(Error::InvalidWindow {
                window: self.window,
                len: self.rounds,
            });
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidConfig("step size must be positive".into()));
        }
        if self.network.deadline.is_none() && self.probe_rounds == 0 {
            return Err(Error::InvalidConfig(
                "probe_rounds must be positive when the deadline is calibrated".into(),
            ));
        }
        Ok(())
    }
}
