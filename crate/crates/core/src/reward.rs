//! Communication and computation physics: fading draws, the normalized-SINR
//! type, the truncated-normal task-size law, delays and the closed-form
//! probability `Q(theta, f)` that a task meets its deadline.

use std::f64::consts::SQRT_2;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::error::{check_unit, Error, Result};

/// Per-agent vector of normalized SINRs, one entry per server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentType {
    theta: Vec<f64>,
}

impl AgentType {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        for &t in &theta {
            check_unit("theta", t)?;
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn arms(&self) -> usize {
        self.theta.len()
    }

    pub(crate) fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }
}

/// `log2(1 + gamma_max * theta)`, bits/s/Hz.
pub fn spectral_efficiency(theta: f64, cfg: &NetworkConfig) -> Result<f64> {
    check_unit("theta", theta)?;
    Ok(rate(theta, cfg.gamma_max))
}

#[inline]
pub(crate) fn rate(theta: f64, gamma_max: f64) -> f64 {
    (gamma_max * theta).ln_1p() / std::f64::consts::LN_2
}

/// Normalized SINR for one fading gain `h` and interference power.
pub fn theta_from_draw(cfg: &NetworkConfig, gain: f64, interference: f64) -> f64 {
    let sinr = cfg.tx_power * gain / (interference + cfg.noise_power);
    (sinr / cfg.gamma_max).min(1.0)
}

/// One arm's normalized SINR: Rayleigh fading (exponential power gain with
/// rate 1) against uniform interference.
pub fn sample_theta<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> f64 {
    let gain: f64 = Exp1.sample(rng);
    let interference = if cfg.interference_max > cfg.interference_min {
        rng.random_range(cfg.interference_min..=cfg.interference_max)
    } else {
        cfg.interference_min
    };
    theta_from_draw(cfg, gain, interference)
}

pub fn sample_type<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> AgentType {
    AgentType {
        theta: (0..cfg.servers).map(|_| sample_theta(cfg, rng)).collect(),
    }
}

/// CDF of one arm's normalized SINR under the channel law.
///
/// With `X = h / (I + N0)`, `P[X <= x] = 1 - E_I[exp(-x (I + N0))]`, which
/// has a closed form for uniform `I`. The clip at 1 puts an atom there.
pub fn theta_cdf(t: f64, cfg: &NetworkConfig) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let x = t * cfg.gamma_max / cfg.tx_power;
    let a = cfg.interference_min + cfg.noise_power;
    let width = cfg.interference_max - cfg.interference_min;
    let survival = if width * x > 0.0 {
        (-x * a).exp() * -(-x * width).exp_m1() / (x * width)
    } else {
        (-x * a).exp()
    };
    1.0 - survival
}

/// Inverse of [`theta_cdf`] by bisection.
pub fn theta_quantile(u: f64, cfg: &NetworkConfig) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    // theta_cdf jumps to 1 at t = 1, so anything above the left limit maps there.
    if u > theta_cdf(hi - 1e-15, cfg) {
        return 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if theta_cdf(mid, cfg) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Finite type distribution: weighted atoms in `[0, 1]^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeAtoms {
    atoms: Vec<(AgentType, f64)>,
}

impl TypeAtoms {
    pub fn new(atoms: Vec<(AgentType, f64)>) -> Result<Self> {
        let Some(first) = atoms.first() else {
            return Err(Error::InvalidConfig(
                "type distribution has no atoms".into(),
            ));
        };
        let arms = first.0.arms();
        let mut total = 0.0;
        for (ty, w) in &atoms {
            if ty.arms() != arms {
                return Err(Error::DimensionMismatch {
                    expected: arms,
                    got: ty.arms(),
                });
            }
            if w.is_nan() || *w < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "atom weight must be non-negative, got {w}"
                )));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "atom weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { atoms })
    }

    /// Discretizes the channel law: each arm's marginal is replaced by the
    /// medians of `levels` equal-probability bins, and arms are combined as
    /// an independent product grid with uniform weights.
    pub fn from_channel(cfg: &NetworkConfig, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::InvalidConfig(
                "need at least one level per arm".into(),
            ));
        }
        let points: Vec<f64> = (0..levels)
            .map(|j| theta_quantile((j as f64 + 0.5) / levels as f64, cfg))
            .collect();
        let count = levels.pow(cfg.servers as u32);
        let weight = 1.0 / count as f64;
        let atoms = (0..count)
            .map(|mut code| {
                let theta = (0..cfg.servers)
                    .map(|_| {
                        let t = points[code % levels];
                        code /= levels;
                        t
                    })
                    .collect();
                (AgentType { theta }, weight)
            })
            .collect();
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[(AgentType, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn arms(&self) -> usize {
        self.atoms[0].0.arms()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &AgentType {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (ty, w) in &self.atoms {
            acc += w;
            if u < acc {
                return ty;
            }
        }
        &self.atoms[self.atoms.len() - 1].0
    }
}

/// Where regenerated agents draw their types from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum TypeLaw {
    /// Rayleigh fading with uniform interference, per [`sample_type`].
    #[default]
    Channel,
    Atoms(TypeAtoms),
}

impl TypeLaw {
    pub fn sample<R: Rng + ?Sized>(&self, cfg: &NetworkConfig, rng: &mut R) -> AgentType {
        match self {
            TypeLaw::Channel => sample_type(cfg, rng),
            TypeLaw::Atoms(atoms) => atoms.sample(rng).clone(),
        }
    }

    /// Fills `theta` in place, avoiding an allocation per regeneration.
    pub(crate) fn fill<R: Rng + ?Sized>(
        &self,
        cfg: &NetworkConfig,
        rng: &mut R,
        theta: &mut [f64],
    ) {
        match self {
            TypeLaw::Channel => theta.iter_mut().for_each(|t| *t = sample_theta(cfg, rng)),
            TypeLaw::Atoms(atoms) => theta.copy_from_slice(atoms.sample(rng).theta()),
        }
    }
}

/// Normal CDF with mean `size_mean` and deviation `size_std`.
pub fn normal_cdf(x: f64, cfg: &NetworkConfig) -> f64 {
    0.5 * (1.0 + libm::erf((x - cfg.size_mean) / (SQRT_2 * cfg.size_std)))
}

/// CDF of the truncated task-size law.
pub fn truncated_normal_cdf(s: f64, cfg: &NetworkConfig) -> f64 {
    SizeLaw::new(cfg).cdf(s)
}

pub fn sample_task_size<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> f64 {
    SizeLaw::new(cfg).sample(rng)
}

/// Truncated normal on `[size_min, size_max]`, normalizer cached.
#[derive(Debug, Clone, Copy)]
pub struct SizeLaw {
    min: f64,
    max: f64,
    mean: f64,
    std: f64,
    cdf_min: f64,
    mass: f64,
}

impl SizeLaw {
    pub fn new(cfg: &NetworkConfig) -> Self {
        let cdf_min = normal_cdf(cfg.size_min, cfg);
        let mass = normal_cdf(cfg.size_max, cfg) - cdf_min;
        Self {
            min: cfg.size_min,
            max: cfg.size_max,
            mean: cfg.size_mean,
            std: cfg.size_std,
            cdf_min,
            mass,
        }
    }

    /// `Phi'(s_b) - Phi'(s_a)`, the probability mass kept by the truncation.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    fn untruncated(&self, x: f64) -> f64 {
        0.5 * (1.0 + libm::erf((x - self.mean) / (SQRT_2 * self.std)))
    }

    #[inline]
    pub fn cdf(&self, s: f64) -> f64 {
        if s <= self.min {
            0.0
        } else if s >= self.max {
            1.0
        } else {
            ((self.untruncated(s) - self.cdf_min) / self.mass).clamp(0.0, 1.0)
        }
    }

    /// Density of the truncated law (zero outside the support).
    pub fn pdf(&self, s: f64) -> f64 {
        if s < self.min || s > self.max {
            return 0.0;
        }
        let z = (s - self.mean) / self.std;
        (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * self.std * self.mass)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // Rejection is cheap unless the window holds little normal mass.
        if self.mass >= 0.05 {
            loop {
                let z: f64 = StandardNormal.sample(rng);
                let s = self.mean + self.std * z;
                if (self.min..=self.max).contains(&s) {
                    return s;
                }
            }
        }
        let u: f64 = rng.random();
        let (mut lo, mut hi) = (self.min, self.max);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Total delay (processing + uplink + downlink) for a task of `size` bits.
/// Returns `+inf` when `theta = 0`, which no deadline can meet.
pub fn total_delay(theta: f64, load: f64, size: f64, cfg: &NetworkConfig) -> f64 {
    if theta <= 0.0 {
        return f64::INFINITY;
    }
    let r = rate(theta, cfg.gamma_max);
    let m = cfg.agents as f64;
    let processing = cfg.cycles_per_bit * m * size * load / cfg.cpu_rate;
    let uplink = size * m * load / (cfg.bandwidth * r);
    let downlink = cfg.result_ratio * size * cfg.downlink_divisor / (cfg.bandwidth * r);
    processing + uplink + downlink
}

/// Largest task size that still meets the deadline at `(theta, load)`.
pub fn size_threshold(theta: f64, load: f64, cfg: &NetworkConfig) -> f64 {
    SuccessModel::new(cfg).threshold(rate(theta, cfg.gamma_max), load)
}

/// `Q(theta, f)`: probability that the total delay meets the deadline.
pub fn success_probability(theta: f64, load: f64, cfg: &NetworkConfig) -> f64 {
    debug_assert!((0.0..=1.0).contains(&theta) && (0.0..=1.0).contains(&load));
    SuccessModel::new(cfg).q(theta, load)
}

/// Bernoulli reward with probability `alpha * Q(theta, f)`.
pub fn sample_reward<R: Rng + ?Sized>(
    theta: f64,
    load: f64,
    alpha: f64,
    cfg: &NetworkConfig,
    rng: &mut R,
) -> bool {
    let p = alpha * success_probability(theta, load, cfg);
    rng.random::<f64>() < p
}

/// `Q` with every configuration-dependent coefficient precomputed.
#[derive(Debug, Clone, Copy)]
pub struct SuccessModel {
    gamma_max: f64,
    /// `d_max * F * B`
    numerator: f64,
    agents: f64,
    /// `c * B`
    cycles_bandwidth: f64,
    cpu_rate: f64,
    /// `rho * nu * F`
    downlink: f64,
    sizes: SizeLaw,
}

impl SuccessModel {
    pub fn new(cfg: &NetworkConfig) -> Self {
        Self {
            gamma_max: cfg.gamma_max,
            numerator: cfg.deadline * cfg.cpu_rate * cfg.bandwidth,
            agents: cfg.agents as f64,
            cycles_bandwidth: cfg.cycles_per_bit * cfg.bandwidth,
            cpu_rate: cfg.cpu_rate,
            downlink: cfg.result_ratio * cfg.downlink_divisor * cfg.cpu_rate,
            sizes: SizeLaw::new(cfg),
        }
    }

    pub fn sizes(&self) -> &SizeLaw {
        &self.sizes
    }

    #[inline]
    pub fn rate(&self, theta: f64) -> f64 {
        rate(theta, self.gamma_max)
    }

    /// Deadline-meeting size threshold `tau` for spectral efficiency `r`.
    #[inline]
    pub fn threshold(&self, r: f64, load: f64) -> f64 {
        self.numerator * r
            / (self.agents * load * (self.cycles_bandwidth * r + self.cpu_rate) + self.downlink)
    }

    #[inline]
    pub fn q_from_rate(&self, r: f64, load: f64) -> f64 {
        self.sizes.cdf(self.threshold(r, load))
    }

    #[inline]
    pub fn q(&self, theta: f64, load: f64) -> f64 {
        self.q_from_rate(self.rate(theta), load)
    }

    /// Analytic `dQ/df`; zero wherever the threshold sits outside the
    /// truncation window, where `Q` is flat.
    pub fn dq_dload(&self, theta: f64, load: f64) -> f64 {
        let r = self.rate(theta);
        let tau = self.threshold(r, load);
        if !(tau > self.sizes.min && tau < self.sizes.max) {
            return 0.0;
        }
        let slope = self.cycles_bandwidth * r + self.cpu_rate;
        let denom = self.agents * load * slope + self.downlink;
        let dtau = -self.agents * self.numerator * r * slope / (denom * denom);
        self.sizes.pdf(tau) * dtau
    }
}
