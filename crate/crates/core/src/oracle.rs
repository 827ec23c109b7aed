//! Exact mean-field dynamics on a truncated state space.
//!
//! The state measure is tracked per type atom over win/loss counters that
//! saturate at `cap`. One iteration applies regeneration, the UCB policy,
//! the resulting profile and the reward step, exactly as one simulation
//! round does for an infinite population. Iterating to a fixed point gives
//! the steady-state profile for small systems.

use serde::{Deserialize, Serialize};

use crate::bandit::counts_distribution;
use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::profile::{PopulationProfile, RewardScaling};
use crate::reward::{SuccessModel, TypeAtoms};

pub const MAX_ARMS: usize = 3;
pub const MAX_CAP: u32 = 6;
pub const MAX_ATOMS: usize = 8;
pub const TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub profile: PopulationProfile,
    pub iterations: usize,
    /// Sup-norm change of the profile in the last iteration.
    pub last_change: f64,
}

/// Enumerated counter states with their policy and successor tables.
struct StateSpace {
    /// `(arm, probability)` pairs with nonzero probability per state.
    policy: Vec<Vec<(usize, f64)>>,
    /// Successor after a win / loss on each arm.
    on_win: Vec<Vec<usize>>,
    on_loss: Vec<Vec<usize>>,
}

impl StateSpace {
    fn new(arms: usize, cap: u32) -> Self {
        let radix = cap as usize + 1;
        let digits = 2 * arms;
        let size = radix.pow(digits as u32);
        let decode = |mut code: usize| {
            let mut z = vec![0u32; digits];
            for d in z.iter_mut() {
                *d = (code % radix) as u32;
                code /= radix;
            }
            z
        };
        let encode = |z: &[u32]| {
            z.iter()
                .rev()
                .fold(0usize, |acc, &d| acc * radix + d as usize)
        };

        let mut policy = Vec::with_capacity(size);
        let mut on_win = Vec::with_capacity(size);
        let mut on_loss = Vec::with_capacity(size);
        for code in 0..size {
            let z = decode(code);
            // digit 2i holds wins on arm i, digit 2i+1 the losses
            let wins: Vec<u32> = (0..arms).map(|i| z[2 * i]).collect();
            let losses: Vec<u32> = (0..arms).map(|i| z[2 * i + 1]).collect();
            let rounds = wins.iter().chain(&losses).sum();
            let probs = counts_distribution(&wins, &losses, rounds);
            policy.push(
                probs
                    .into_iter()
                    .enumerate()
                    .filter(|(_, p)| *p > 0.0)
                    .collect(),
            );
            let bump = |digit: usize| {
                let mut next = z.clone();
                next[digit] = (next[digit] + 1).min(cap);
                encode(&next)
            };
            on_win.push((0..arms).map(|i| bump(2 * i)).collect());
            on_loss.push((0..arms).map(|i| bump(2 * i + 1)).collect());
        }
        Self {
            policy,
            on_win,
            on_loss,
        }
    }

    fn len(&self) -> usize {
        self.policy.len()
    }
}

/// Fixed-point population profile of the truncated mean-field system with
/// type distribution `atoms` and reward multipliers `alpha`.
pub fn steady_profile_oracle(
    cfg: &NetworkConfig,
    atoms: &TypeAtoms,
    alpha: &RewardScaling,
    cap: u32,
) -> Result<OracleSolution> {
    cfg.validate()?;
    let n = cfg.servers;
    if n > MAX_ARMS {
        return Err(Error::InvalidConfig(format!(
            "oracle supports at most {MAX_ARMS} arms, got {n}"
        )));
    }
    if cap == 0 || cap > MAX_CAP {
        return Err(Error::InvalidConfig(format!(
            "oracle counter cap must lie in 1..={MAX_CAP}, got {cap}"
        )));
    }
    if atoms.len() > MAX_ATOMS {
        return Err(Error::InvalidConfig(format!(
            "oracle supports at most {MAX_ATOMS} type atoms, got {}",
            atoms.len()
        )));
    }
    for got in [atoms.arms(), alpha.arms()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }

    let space = StateSpace::new(n, cap);
    let model = SuccessModel::new(cfg);
    let beta = cfg.continuation;
    let rates: Vec<Vec<f64>> = atoms
        .atoms()
        .iter()
        .map(|(ty, _)| ty.theta().iter().map(|&t| model.rate(t)).collect())
        .collect();

    // Every agent starts freshly regenerated.
    let mut measure: Vec<Vec<f64>> = atoms
        .atoms()
        .iter()
        .map(|(_, w)| {
            let mut v = vec![0.0; space.len()];
            v[0] = *w;
            v
        })
        .collect();
    let mut pre = vec![vec![0.0; space.len()]; atoms.len()];
    let mut next = vec![vec![0.0; space.len()]; atoms.len()];
    let mut previous: Option<Vec<f64>> = None;
    let mut last_change = f64::INFINITY;

    for iteration in 1..=MAX_ITERATIONS {
        for ((p, mu), (_, w)) in pre.iter_mut().zip(&measure).zip(atoms.atoms()) {
            for (x, m) in p.iter_mut().zip(mu) {
                *x = beta * m;
            }
            p[0] += (1.0 - beta) * w;
        }

        let mut profile = vec![0.0; n];
        for mu in &pre {
            for (mass, pol) in mu.iter().zip(&space.policy) {
                if *mass == 0.0 {
                    continue;
                }
                for &(arm, p) in pol {
                    profile[arm] += mass * p;
                }
            }
        }

        for ((mu, out), r) in pre.iter().zip(next.iter_mut()).zip(&rates) {
            out.iter_mut().for_each(|x| *x = 0.0);
            let win_prob: Vec<f64> = (0..n)
                .map(|i| alpha[i] * model.q_from_rate(r[i], profile[i]))
                .collect();
            for (s, &mass) in mu.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                for &(arm, p) in &space.policy[s] {
                    let flow = mass * p;
                    out[space.on_win[s][arm]] += flow * win_prob[arm];
                    out[space.on_loss[s][arm]] += flow * (1.0 - win_prob[arm]);
                }
            }
        }
        // The profile alone can sit still while the measure is in motion
        // (every fresh agent explores uniformly), so the measure must settle too.
        let measure_change: f64 = measure
            .iter()
            .zip(&next)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .sum();
        std::mem::swap(&mut measure, &mut next);

        if let Some(prev) = &previous {
            last_change = prev
                .iter()
                .zip(&profile)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if last_change < TOLERANCE && measure_change < TOLERANCE {
                let total: f64 = profile.iter().sum();
                profile.iter_mut().for_each(|x| *x /= total);
                return Ok(OracleSolution {
                    profile: PopulationProfile::new(profile)?,
                    iterations: iteration,
                    last_change,
                });
            }
        }
        previous = Some(profile);
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        last_change,
    })
}
