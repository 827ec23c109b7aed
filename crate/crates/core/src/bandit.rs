//! Mean-field multi-agent bandit engine.
//!
//! Each round runs in three phases:
//!
//! 1. decision: every agent may regenerate, then picks an arm by UCB from
//!    its own counters;
//! 2. profile: the fraction of agents on each arm is counted;
//! 3. reward: every agent draws a Bernoulli reward with probability
//!    `alpha_i * Q(theta_i, f_i)` using the profile of the same round.
//!
//! Phases 1 and 3 run in parallel across agents. All randomness comes from
//! per-agent streams (see [`crate::rng`]), so traces are identical for any
//! thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::profile::{PopulationProfile, RewardScaling};
use crate::reward::{AgentType, SuccessModel, TypeLaw};
use crate::rng::{stream, Purpose};

/// Win/loss counters per arm since the last regeneration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    wins: Vec<u32>,
    losses: Vec<u32>,
    rounds_alive: u32,
}

impl AgentState {
    pub fn new(arms: usize) -> Self {
        Self {
            wins: vec![0; arms],
            losses: vec![0; arms],
            rounds_alive: 0,
        }
    }

    pub fn from_counts(wins: Vec<u32>, losses: Vec<u32>) -> Result<Self> {
        if wins.len() != losses.len() {
            return Err(Error::DimensionMismatch {
                expected: wins.len(),
                got: losses.len(),
            });
        }
        let rounds_alive = wins.iter().chain(&losses).sum();
        Ok(Self {
            wins,
            losses,
            rounds_alive,
        })
    }

    pub fn wins(&self) -> &[u32] {
        &self.wins
    }

    pub fn losses(&self) -> &[u32] {
        &self.losses
    }

    pub fn rounds_alive(&self) -> u32 {
        self.rounds_alive
    }

    pub fn arms(&self) -> usize {
        self.wins.len()
    }

    pub fn pulls(&self, arm: usize) -> u32 {
        self.wins[arm] + self.losses[arm]
    }

    pub fn record(&mut self, arm: usize, win: bool) {
        if win {
            self.wins[arm] += 1;
        } else {
            self.losses[arm] += 1;
        }
        self.rounds_alive += 1;
    }

    pub fn reset(&mut self) {
        self.wins.fill(0);
        self.losses.fill(0);
        self.rounds_alive = 0;
    }
}

/// UCB1 index `wins/pulls + sqrt(2 ln(t) / pulls)` for a pulled arm.
#[inline]
pub fn ucb_index(wins: u32, pulls: u32, ln_rounds: f64) -> f64 {
    let p = pulls as f64;
    wins as f64 / p + (2.0 * ln_rounds / p).sqrt()
}

/// Arms the policy may pick from `state`: the unpulled arms if any,
/// otherwise the UCB maximizers. Every returned arm is equally likely.
fn candidates(wins: &[u32], losses: &[u32], rounds: u32, mut visit: impl FnMut(usize)) -> usize {
    let arms = wins.len();
    let unpulled = (0..arms).filter(|&i| wins[i] + losses[i] == 0).count();
    if unpulled > 0 {
        (0..arms)
            .filter(|&i| wins[i] + losses[i] == 0)
            .for_each(&mut visit);
        return unpulled;
    }
    let ln_t = (rounds as f64).ln();
    let best = (0..arms)
        .map(|i| ucb_index(wins[i], wins[i] + losses[i], ln_t))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut count = 0;
    for i in 0..arms {
        if ucb_index(wins[i], wins[i] + losses[i], ln_t) == best {
            visit(i);
            count += 1;
        }
    }
    count
}

/// Exact policy `sigma(z, .)`: the probability of each arm under forced
/// exploration and uniform tie-breaking.
pub fn ucb_distribution(state: &AgentState) -> Vec<f64> {
    counts_distribution(&state.wins, &state.losses, state.rounds_alive)
}

pub(crate) fn counts_distribution(wins: &[u32], losses: &[u32], rounds: u32) -> Vec<f64> {
    let mut picked = Vec::with_capacity(wins.len());
    let count = candidates(wins, losses, rounds, |i| picked.push(i));
    let mut probs = vec![0.0; wins.len()];
    for i in picked {
        probs[i] = 1.0 / count as f64;
    }
    probs
}

pub fn ucb_select<R: Rng + ?Sized>(state: &AgentState, rng: &mut R) -> usize {
    let count = candidates(&state.wins, &state.losses, state.rounds_alive, |_| {});
    let target = if count == 1 {
        0
    } else {
        rng.random_range(0..count)
    };
    let mut seen = 0;
    let mut chosen = 0;
    candidates(&state.wins, &state.losses, state.rounds_alive, |i| {
        if seen == target {
            chosen = i;
        }
        seen += 1;
    });
    chosen
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    ty: AgentType,
    state: AgentState,
    /// Cached spectral efficiency per arm.
    rates: Vec<f64>,
}

impl Agent {
    pub fn new(ty: AgentType, cfg: &NetworkConfig) -> Self {
        let arms = ty.arms();
        let mut agent = Self {
            ty,
            state: AgentState::new(arms),
            rates: vec![0.0; arms],
        };
        agent.refresh_rates(cfg.gamma_max);
        agent
    }

    pub fn with_state(ty: AgentType, state: AgentState, cfg: &NetworkConfig) -> Result<Self> {
        if ty.arms() != state.arms() {
            return Err(Error::DimensionMismatch {
                expected: ty.arms(),
                got: state.arms(),
            });
        }
        let mut agent = Self::new(ty, cfg);
        agent.state = state;
        Ok(agent)
    }

    pub fn agent_type(&self) -> &AgentType {
        &self.ty
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    fn refresh_rates(&mut self, gamma_max: f64) {
        for (r, &t) in self.rates.iter_mut().zip(self.ty.theta()) {
            *r = crate::reward::rate(t, gamma_max);
        }
    }

    /// With probability `1 - beta` zeroes the state and redraws the type from
    /// the channel law. Returns whether the agent regenerated.
    pub fn regenerate_if_needed<R: Rng + ?Sized>(
        &mut self,
        cfg: &NetworkConfig,
        rng: &mut R,
    ) -> bool {
        self.regenerate_with(cfg, &TypeLaw::Channel, rng)
    }

    pub fn regenerate_with<R: Rng + ?Sized>(
        &mut self,
        cfg: &NetworkConfig,
        law: &TypeLaw,
        rng: &mut R,
    ) -> bool {
        if rng.random::<f64>() < cfg.continuation {
            return false;
        }
        self.state.reset();
        law.fill(cfg, rng, self.ty.theta_mut());
        self.refresh_rates(cfg.gamma_max);
        true
    }
}

/// Per-round series produced by [`simulate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub profiles: Vec<PopulationProfile>,
    pub mean_reward: Vec<f64>,
    pub seed: u64,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn empty(seed: u64) -> Self {
        Self {
            profiles: Vec::new(),
            mean_reward: Vec::new(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub profile: PopulationProfile,
    pub mean_reward: f64,
}

/// Network configuration plus everything derived from it that the round
/// loop needs.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: NetworkConfig,
    law: TypeLaw,
    model: SuccessModel,
}

impl Simulator {
    pub fn new(cfg: NetworkConfig) -> Result<Self> {
        Self::with_type_law(cfg, TypeLaw::Channel)
    }

    pub fn with_type_law(cfg: NetworkConfig, law: TypeLaw) -> Result<Self> {
        cfg.validate()?;
        if let TypeLaw::Atoms(atoms) = &law {
            if atoms.arms() != cfg.servers {
                return Err(Error::DimensionMismatch {
                    expected: cfg.servers,
                    got: atoms.arms(),
                });
            }
        }
        let model = SuccessModel::new(&cfg);
        Ok(Self { cfg, law, model })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn type_law(&self) -> &TypeLaw {
        &self.law
    }

    /// `m` agents with fresh types and zero counters.
    pub fn init_agents(&self, seed: u64) -> Vec<Agent> {
        (0..self.cfg.agents)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream(seed, k as u64, 0, Purpose::Init);
                Agent::new(self.law.sample(&self.cfg, &mut rng), &self.cfg)
            })
            .collect()
    }

    pub fn step(
        &self,
        agents: &mut [Agent],
        alpha: &RewardScaling,
        seed: u64,
        round: u64,
    ) -> Result<RoundOutcome> {
        let m = self.cfg.agents;
        let n = self.cfg.servers;
        if agents.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: agents.len(),
            });
        }
        if alpha.arms() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: alpha.arms(),
            });
        }

        let choices: Vec<usize> = agents
            .par_iter_mut()
            .enumerate()
            .with_min_len(512)
            .map(|(k, agent)| {
                let mut rng = stream(seed, k as u64, round, Purpose::Decide);
                agent.regenerate_with(&self.cfg, &self.law, &mut rng);
                ucb_select(&agent.state, &mut rng)
            })
            .collect();

        let mut counts = vec![0usize; n];
        for &c in &choices {
            counts[c] += 1;
        }
        let profile = PopulationProfile::from_counts(&counts, m);
        let loads = profile.as_slice();

        let wins: u64 = agents
            .par_iter_mut()
            .zip(choices.par_iter())
            .enumerate()
            .with_min_len(512)
            .map(|(k, (agent, &arm))| {
                let mut rng = stream(seed, k as u64, round, Purpose::Reward);
                let p = alpha[arm] * self.model.q_from_rate(agent.rates[arm], loads[arm]);
                let win = rng.random::<f64>() < p;
                agent.state.record(arm, win);
                win as u64
            })
            .sum();

        Ok(RoundOutcome {
            profile,
            mean_reward: wins as f64 / m as f64,
        })
    }

    pub fn simulate(
        &self,
        alpha: &RewardScaling,
        rounds: usize,
        seed: u64,
    ) -> Result<SimulationTrace> {
        if rounds == 0 {
            return Err(Error::InvalidConfig(
                "simulation needs at least one round".into(),
            ));
        }
        let mut agents = self.init_agents(seed);
        let mut trace = SimulationTrace {
            profiles: Vec::with_capacity(rounds),
            mean_reward: Vec::with_capacity(rounds),
            seed,
        };
        for t in 0..rounds {
            let out = self.step(&mut agents, alpha, seed, t as u64)?;
            trace.profiles.push(out.profile);
            trace.mean_reward.push(out.mean_reward);
        }
        Ok(trace)
    }
}

/// Runs `rounds` rounds from freshly generated agents.
pub fn simulate(
    cfg: &NetworkConfig,
    alpha: &RewardScaling,
    rounds: usize,
    seed: u64,
) -> Result<SimulationTrace> {
    Simulator::new(cfg.clone())?.simulate(alpha, rounds, seed)
}

/// Component-wise mean of the last `window` profiles.
pub fn average_profile(trace: &SimulationTrace, window: usize) -> Result<PopulationProfile> {
    let len = trace.profiles.len();
    if window == 0 || window > len {
        return Err(Error::InvalidWindow { window, len });
    }
    let arms = trace.profiles[0].arms();
    let mut mean = vec![0.0; arms];
    for p in &trace.profiles[len - window..] {
        for (acc, x) in mean.iter_mut().zip(p.as_slice()) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= window as f64);
    PopulationProfile::new(mean)
}
