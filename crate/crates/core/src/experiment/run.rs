use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::calibrate::{calibrate_dmax, Calibration};
use super::ExperimentConfig;
use crate::analysis::{uniqueness_check, UniquenessReport};
use crate::balancer::{load_balance, BalancerParams, OptimizationTrace};
use crate::bandit::{average_profile, SimulationTrace, Simulator};
use crate::config::NetworkConfig;
use crate::error::Result;
use crate::profile::RewardScaling;

/// Factor applied to the optimized scaling for the scale-invariance probe.
pub const SCALE_FACTOR: f64 = 0.5;

/// Profile under `alpha` versus `SCALE_FACTOR * alpha` (off the simplex),
/// both simulated with the same seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCheck {
    pub factor: f64,
    pub profile: Vec<f64>,
    pub scaled_profile: Vec<f64>,
    pub max_abs_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub calibration_s: f64,
    pub baseline_s: f64,
    pub optimization_s: f64,
    pub final_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Internal (bit-based) network configuration with the deadline used.
    pub network: NetworkConfig,
    pub calibration: Option<Calibration>,
    pub uniqueness: UniquenessReport,
    /// Simulation under uniform scaling.
    pub baseline: SimulationTrace,
    pub baseline_profile: Vec<f64>,
    pub optimizer: OptimizationTrace,
    pub final_alpha: Vec<f64>,
    pub best_alpha: Vec<f64>,
    /// Simulation under the optimized scaling.
    pub adjusted: SimulationTrace,
    pub final_profile: Vec<f64>,
    pub scale_check: ScaleCheck,
    pub timings: Timings,
}

/// Seeds: calibration, the baseline and optimizer iteration `k` use
/// `seed`, `seed` and `seed + k`; the final run uses `seed + iterations`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let target = config.target_profile()?;
    let started = Instant::now();

    let clock = Instant::now();
    let (network, calibration) = match config.network.deadline {
        Some(_) => (config.network.resolve(f64::NAN)?, None),
        None => {
            let probe_cfg = config.network.resolve(1.0)?;
            let cal = calibrate_dmax(&probe_cfg, config.probe_rounds, config.seed)?;
            (config.network.resolve(cal.deadline)?, Some(cal))
        }
    };
    let calibration_s = clock.elapsed().as_secs_f64();

    let uniqueness = uniqueness_check(&network);
    let sim = Simulator::new(network.clone())?;

    let clock = Instant::now();
    let uniform = RewardScaling::uniform(network.servers);
    let baseline = sim.simulate(&uniform, config.rounds, config.seed)?;
    let baseline_profile = average_profile(&baseline, config.window)?.into_inner();
    let baseline_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let params = BalancerParams {
        step_size: config.step_size,
        iterations: config.iterations,
        rounds: config.rounds,
        window: config.window,
        base_seed: config.seed,
        stop_below: config.stop_below,
    };
    let outcome = load_balance(&target, &params, &sim)?;
    let optimization_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let final_seed = config.seed.wrapping_add(config.iterations as u64);
    let adjusted = sim.simulate(&outcome.alpha, config.rounds, final_seed)?;
    let final_profile = average_profile(&adjusted, config.window)?.into_inner();
    let final_s = clock.elapsed().as_secs_f64();

    let scaled = RewardScaling::multipliers(
        outcome
            .alpha
            .as_slice()
            .iter()
            .map(|a| a * SCALE_FACTOR)
            .collect(),
    )?;
    let scaled_run = sim.simulate(&scaled, config.rounds, final_seed)?;
    let scaled_profile = average_profile(&scaled_run, config.window)?.into_inner();
    let max_abs_difference = final_profile
        .iter()
        .zip(&scaled_profile)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    Ok(ExperimentReport {
        config: config.clone(),
        network,
        calibration,
        uniqueness,
        baseline,
        baseline_profile,
        final_alpha: outcome.alpha.as_slice().to_vec(),
        best_alpha: outcome.best_alpha.as_slice().to_vec(),
        optimizer: outcome.trace,
        adjusted,
        scale_check: ScaleCheck {
            factor: SCALE_FACTOR,
            profile: final_profile.clone(),
            scaled_profile,
            max_abs_difference,
        },
        final_profile,
        timings: Timings {
            calibration_s,
            baseline_s,
            optimization_s,
            final_s,
            total_s: started.elapsed().as_secs_f64(),
        },
    })
}
