//! Physical and game constants shared by every part of the model.
//!
//! Task sizes are held in bits. The experiment layer accepts Mbit in its
//! config files and converts when it builds a [`NetworkConfig`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 99.9th percentile of Exponential(1), i.e. `-ln(0.001)`.
pub const EXP_Q999: f64 = 6.907_755_278_982_137;

/// Bits per Mbit.
pub const MBIT: f64 = 1.0e6;

/// Noise power in watts for the -174 dBm preset value.
pub fn noise_power_watts() -> f64 {
    dbm_to_watts(-174.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1.0e-3
}

/// SINR cap that keeps the normalized SINR inside [0, 1] for all but 0.1%
/// of fading draws at the weakest interference level.
pub fn calibrated_gamma_max(tx_power: f64, interference_min: f64, noise_power: f64) -> f64 {
    tx_power * EXP_Q999 / (interference_min + noise_power)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Number of agents (devices), `m`.
    pub agents: usize,
    /// Number of arms (edge servers), `n`.
    pub servers: usize,
    /// Shared uplink bandwidth per server, Hz.
    pub bandwidth: f64,
    /// CPU rate per server, cycles/s.
    pub cpu_rate: f64,
    /// Processing cycles per task bit.
    pub cycles_per_bit: f64,
    /// Result size as a fraction of the task size.
    pub result_ratio: f64,
    /// Downlink bandwidth is `bandwidth / downlink_divisor`.
    pub downlink_divisor: f64,
    /// Device transmit power, W.
    pub tx_power: f64,
    /// Noise power, W.
    pub noise_power: f64,
    pub interference_min: f64,
    pub interference_max: f64,
    pub gamma_max: f64,
    /// Task-size truncation bounds and the underlying normal law, bits.
    pub size_min: f64,
    pub size_max: f64,
    pub size_mean: f64,
    pub size_std: f64,
    /// Deadline `d_max`, seconds.
    pub deadline: f64,
    /// Continuation probability `beta`; agents regenerate with `1 - beta`.
    pub continuation: f64,
}

impl NetworkConfig {
    /// Parameters of the published experiments, with the unpublished
    /// constants filled by the crate defaults. The deadline is set to the
    /// published `2m * 0.26 s`; experiments normally recalibrate it.
    pub fn paper(agents: usize, servers: usize) -> Self {
        let tx_power = 0.2;
        let noise_power = noise_power_watts();
        let interference_min = 0.008;
        let size_min = 0.5 * MBIT;
        let size_max = 1.0 * MBIT;
        Self {
            agents,
            servers,
            bandwidth: 10.0e6,
            cpu_rate: 4.0e9,
            cycles_per_bit: 100.0,
            result_ratio: 0.1,
            downlink_divisor: 10.0,
            tx_power,
            noise_power,
            interference_min,
            interference_max: 0.012,
            gamma_max: calibrated_gamma_max(tx_power, interference_min, noise_power),
            size_min,
            size_max,
            size_mean: 0.5 * (size_min + size_max),
            size_std: (size_max - size_min) / 4.0,
            deadline: 2.0 * agents as f64 * 0.26,
            continuation: 0.95,
        }
    }

    pub fn with_deadline(mut self, deadline: f64) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.agents == 0 {
            return fail("agent count must be positive".into());
        }
        if self.servers == 0 {
            return fail("server count must be positive".into());
        }
        let positive = [
            ("bandwidth", self.bandwidth),
            ("cpu_rate", self.cpu_rate),
            ("cycles_per_bit", self.cycles_per_bit),
            ("result_ratio", self.result_ratio),
            ("downlink_divisor", self.downlink_divisor),
            ("tx_power", self.tx_power),
            ("noise_power", self.noise_power),
            ("interference_min", self.interference_min),
            ("interference_max", self.interference_max),
            ("gamma_max", self.gamma_max),
            ("size_min", self.size_min),
            ("size_max", self.size_max),
            ("size_mean", self.size_mean),
            ("size_std", self.size_std),
            ("deadline", self.deadline),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return fail(format!("{name} must be finite and positive, got {value}"));
            }
        }
        if self.size_min >= self.size_max {
            return fail(format!(
                "task-size bounds must satisfy size_min < size_max ({} >= {})",
                self.size_min, self.size_max
            ));
        }
        if self.interference_min > self.interference_max {
            return fail("interference_min exceeds interference_max".into());
        }
        if !(self.continuation > 0.0 && self.continuation < 1.0) {
            return fail(format!(
                "continuation probability must lie in (0, 1), got {}",
                self.continuation
            ));
        }
        Ok(())
    }
}
