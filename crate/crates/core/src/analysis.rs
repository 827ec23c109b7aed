//! Analytic companions to the game: the Lipschitz constant of `Q` in the
//! load, the steady-state uniqueness condition `beta (1 + L) < 1`, and the
//! type pushforward that turns a reward scaling into an equivalent type.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::reward::{rate, SizeLaw, SuccessModel};

/// Upper bound on `|dQ/df|` over `f` in `[0, 1]` for one type value.
///
/// The Gaussian factor of the derivative is bounded by 1 and the rational
/// factor peaks at `f = 0`, giving
/// `m d_max F B r (c B r + F) / ((rho nu F)^2 sqrt(2 pi) sigma Z)`.
pub fn lipschitz_constant(theta: f64, cfg: &NetworkConfig) -> f64 {
    let r = rate(theta, cfg.gamma_max);
    let z = SizeLaw::new(cfg).mass();
    let downlink = cfg.result_ratio * cfg.downlink_divisor * cfg.cpu_rate;
    let numerator = cfg.agents as f64
        * cfg.deadline
        * cfg.cpu_rate
        * cfg.bandwidth
        * r
        * (cfg.cycles_per_bit * cfg.bandwidth * r + cfg.cpu_rate);
    numerator / (downlink * downlink) / ((2.0 * PI).sqrt() * cfg.size_std * z)
}

/// Analytic `dQ/df` at `(theta, f)`.
pub fn success_derivative(theta: f64, load: f64, cfg: &NetworkConfig) -> f64 {
    SuccessModel::new(cfg).dq_dload(theta, load)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// Worst-case Lipschitz constant (at `theta = 1`).
    pub lipschitz: f64,
    pub beta: f64,
    /// `beta * (1 + L)`.
    pub condition_value: f64,
    pub holds: bool,
}

impl UniquenessReport {
    pub fn from_parts(lipschitz: f64, beta: f64) -> Self {
        let condition_value = beta * (1.0 + lipschitz);
        Self {
            lipschitz,
            beta,
            condition_value,
            holds: condition_value < 1.0,
        }
    }
}

/// Evaluates the sufficient condition for a unique mean-field steady state.
/// `L` grows with `theta`, so the bound is taken at `theta = 1`.
pub fn uniqueness_check(cfg: &NetworkConfig) -> UniquenessReport {
    UniquenessReport::from_parts(lipschitz_constant(1.0, cfg), cfg.continuation)
}

const PUSHFORWARD_TOL: f64 = 1e-12;

/// Finds `theta' in [0, theta]` with `Q(theta', f) = alpha * Q(theta, f)`.
///
/// `Q` is continuous and non-decreasing in `theta` with `Q(0, f) = 0`, so
/// bisection on `[0, theta]` always brackets a root.
pub fn pushforward_theta(alpha: f64, theta: f64, load: f64, cfg: &NetworkConfig) -> f64 {
    let model = SuccessModel::new(cfg);
    let full = model.q(theta, load);
    let target = alpha * full;
    if target <= 0.0 {
        return 0.0;
    }
    if target >= full {
        return theta;
    }
    let (mut lo, mut hi) = (0.0, theta);
    let mut best = theta;
    let mut best_gap = full - target;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let q = model.q(mid, load);
        let gap = (q - target).abs();
        if gap < best_gap {
            best = mid;
            best_gap = gap;
        }
        if gap <= PUSHFORWARD_TOL || hi - lo <= f64::EPSILON * theta {
            break;
        }
        if q < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}
