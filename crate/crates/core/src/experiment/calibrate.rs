use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::reward::{sample_theta, total_delay, SizeLaw, TypeLaw};
use crate::rng::{stream, Purpose, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub probe_rounds: usize,
    /// Finite delay samples that entered the mean.
    pub samples: u64,
    /// Samples dropped because the drawn type had zero spectral efficiency.
    pub infinite_samples: u64,
    /// Mean total delay over all probed tasks, seconds.
    pub mean_delay: f64,
    /// Mean delay divided by the number of agents.
    pub per_agent_delay: f64,
    /// Calibrated deadline `2 m * per_agent_delay`.
    pub deadline: f64,
}

/// Calibrates the deadline from the channel and task-size laws of `cfg`.
pub fn calibrate_dmax(cfg: &NetworkConfig, probe_rounds: usize, seed: u64) -> Result<Calibration> {
    let sizes = SizeLaw::new(cfg);
    calibrate_dmax_with(cfg, &TypeLaw::Channel, probe_rounds, seed, |rng| {
        sizes.sample(rng)
    })
}

/// Probes the communication model without learning: every round each agent
/// offloads to a uniformly random server, draws a type for that link and a
/// task size, and the resulting total delay is recorded. The deadline is
/// twice the per-agent mean delay scaled by `m`.
pub fn calibrate_dmax_with<F>(
    cfg: &NetworkConfig,
    law: &TypeLaw,
    probe_rounds: usize,
    seed: u64,
    sample_size: F,
) -> Result<Calibration>
where
    F: Fn(&mut SimRng) -> f64 + Sync,
{
    cfg.validate()?;
    if probe_rounds == 0 {
        return Err(Error::InvalidConfig(
            "probe_rounds must be at least 1".into(),
        ));
    }
    let m = cfg.agents;
    let n = cfg.servers;
    let mut total = 0.0;
    let mut samples = 0u64;
    let mut infinite = 0u64;

    for round in 0..probe_rounds as u64 {
        let choices: Vec<usize> = (0..m)
            .into_par_iter()
            .map(|k| stream(seed, k as u64, round, Purpose::ProbeChoice).random_range(0..n))
            .collect();
        let mut counts = vec![0usize; n];
        for &c in &choices {
            counts[c] += 1;
        }
        let delays: Vec<f64> = choices
            .par_iter()
            .enumerate()
            .map(|(k, &arm)| {
                let mut rng = stream(seed, k as u64, round, Purpose::ProbeDelay);
                let theta = match law {
                    TypeLaw::Channel => sample_theta(cfg, &mut rng),
                    TypeLaw::Atoms(_) => law.sample(cfg, &mut rng).theta()[arm],
                };
                let size = sample_size(&mut rng);
                total_delay(theta, counts[arm] as f64 / m as f64, size, cfg)
            })
            .collect();
        // Sequential sum keeps the result independent of the thread count.
        for d in delays {
            if d.is_finite() {
                total += d;
                samples += 1;
            } else {
                infinite += 1;
            }
        }
    }
    if samples == 0 {
        return Err(Error::InvalidConfig(
            "every probed delay was infinite; cannot calibrate the deadline".into(),
        ));
    }
    let mean_delay = total / samples as f64;
    let per_agent_delay = mean_delay / m as f64;
    Ok(Calibration {
        probe_rounds,
        samples,
        infinite_samples: infinite,
        mean_delay,
        per_agent_delay,
        deadline: 2.0 * m as f64 * per_agent_delay,
    })
}
