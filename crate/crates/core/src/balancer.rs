//! Projected gradient descent over reward scalings on the unit simplex.
//!
//! Each iteration simulates the game under the current scaling, averages
//! the trailing profile, and moves the scaling against `f(alpha) - f*`.

use serde::{Deserialize, Serialize};

use crate::bandit::{average_profile, Simulator};
use crate::error::{Error, Result};
use crate::profile::{PopulationProfile, RewardScaling, TargetProfile};

/// Euclidean projection onto `{x >= 0, sum x = 1}` by sort-and-threshold.
pub fn project_simplex(v: &[f64]) -> RewardScaling {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let n = v.len();
    // Already feasible up to rounding: the projection is the point itself.
    let sum: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (sum - 1.0).abs() <= 4.0 * n as f64 * f64::EPSILON {
        return RewardScaling::from_projection(v.to_vec());
    }

    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            shift = candidate;
        }
    }
    RewardScaling::from_projection(v.iter().map(|&x| (x - shift).max(0.0)).collect())
}

/// Gradient estimate `f - f*`.
pub fn estimate_gradient(measured: &PopulationProfile, target: &TargetProfile) -> Result<Vec<f64>> {
    if measured.arms() != target.arms() {
        return Err(Error::DimensionMismatch {
            expected: target.arms(),
            got: measured.arms(),
        });
    }
    Ok(measured
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(f, t)| f - t)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancerParams {
    pub step_size: f64,
    pub iterations: usize,
    /// Rounds per inner simulation.
    pub rounds: usize,
    /// Trailing rounds averaged into the measured profile.
    pub window: usize,
    /// Iteration `k` (0-based) simulates with seed `base_seed + k`.
    pub base_seed: u64,
    /// Stop once the 10-iteration moving average of the objective drops
    /// below this value. `None` always runs every iteration.
    pub stop_below: Option<f64>,
}

impl Default for BalancerParams {
    fn default() -> Self {
        Self {
            step_size: 0.5,
            iterations: 150,
            rounds: 300,
            window: 50,
            base_seed: 0,
            stop_below: Some(1e-4),
        }
    }
}

pub const MOVING_AVERAGE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Scaling used for this iteration's simulation.
    pub alpha: Vec<f64>,
    /// Trailing-average profile measured under `alpha`.
    pub profile: Vec<f64>,
    /// `0.5 * |f - f*|^2`, the minimized objective.
    pub objective: f64,
    /// `|f - f*|^2`.
    pub objective_sq: f64,
    /// `|f - f*|`.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub records: Vec<OptimizationRecord>,
    pub step_size: f64,
    pub converged: bool,
    /// Index into `records` of the lowest objective seen.
    pub best: usize,
}

impl OptimizationTrace {
    pub fn empty(step_size: f64) -> Self {
        Self {
            records: Vec::new(),
            step_size,
            converged: false,
            best: 0,
        }
    }

    pub fn objectives_sq(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective_sq).collect()
    }
}

/// Trailing moving averages of `values` over `width` entries; entry `i` of
/// the result averages `values[i + 1 - width ..= i]`.
pub fn moving_average(values: &[f64], width: usize) -> Vec<f64> {
    if width == 0 || values.len() < width {
        return Vec::new();
    }
    values
        .windows(width)
        .map(|w| w.iter().sum::<f64>() / width as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceOutcome {
    pub alpha: RewardScaling,
    pub best_alpha: RewardScaling,
    pub trace: OptimizationTrace,
}

pub fn objective_parts(measured: &[f64], target: &[f64]) -> (f64, f64, f64) {
    let sq: f64 = measured
        .iter()
        .zip(target)
        .map(|(f, t)| (f - t) * (f - t))
        .sum();
    (0.5 * sq, sq, sq.sqrt())
}

pub fn load_balance(
    target: &TargetProfile,
    params: &BalancerParams,
    sim: &Simulator,
) -> Result<BalanceOutcome> {
    let n = sim.config().servers;
    if target.arms() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: target.arms(),
        });
    }
    if params.iterations == 0 {
        return Err(Error::InvalidConfig(
            "optimizer needs at least one iteration".into(),
        ));
    }
    if params.window == 0 || params.window > params.rounds {
        return Err(Error::InvalidWindow {
            window: params.window,
            len: params.rounds,
        });
    }
    if !(params.step_size.is_finite() && params.step_size > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "step size must be positive, got {}",
            params.step_size
        )));
    }

    let mut alpha = RewardScaling::uniform(n);
    let mut trace = OptimizationTrace::empty(params.step_size);
    let mut best_alpha = alpha.clone();
    let mut best_objective = f64::INFINITY;

    for k in 0..params.iterations {
        let seed = params.base_seed.wrapping_add(k as u64);
        let run = sim.simulate(&alpha, params.rounds, seed)?;
        let measured = average_profile(&run, params.window)?;
        let (objective, objective_sq, distance) =
            objective_parts(measured.as_slice(), target.as_slice());
        if !objective.is_finite() {
            return Err(Error::NonFiniteObjective(k + 1));
        }
        if objective < best_objective {
            best_objective = objective;
            best_alpha = alpha.clone();
            trace.best = k;
        }
        let gradient = estimate_gradient(&measured, target)?;
        let stepped: Vec<f64> = alpha
            .as_slice()
            .iter()
            .zip(&gradient)
            .map(|(a, g)| a - params.step_size * g)
            .collect();
        trace.records.push(OptimizationRecord {
            iteration: k + 1,
            alpha: alpha.as_slice().to_vec(),
            profile: measured.into_inner(),
            objective,
            objective_sq,
            distance,
        });
        alpha = project_simplex(&stepped);

        if let Some(threshold) = params.stop_below {
            let recent = &trace.records[trace.records.len().saturating_sub(MOVING_AVERAGE)..];
            if recent.len() == MOVING_AVERAGE
                && recent.iter().map(|r| r.objective).sum::<f64>() / (MOVING_AVERAGE as f64)
                    < threshold
            {
                trace.converged = true;
                break;
            }
        }
    }

    Ok(BalanceOutcome {
        alpha,
        best_alpha,
        trace,
    })
}
