//! Decentralized task offloading in dense edge networks as a mean-field
//! multi-armed bandit game, with a projected-gradient load balancer that
//! tunes per-server reward scalings toward a target population profile.
//!
//! Module map:
//!
//! - [`reward`]: channel, task-size and delay physics and the success
//!   probability `Q(theta, f)`;
//! - [`bandit`]: agents, UCB selection, regeneration and the round loop;
//! - [`analysis`]: Lipschitz bound, uniqueness check, type pushforward;
//! - [`oracle`]: exact truncated-state mean-field dynamics;
//! - [`balancer`]: simplex projection and the load-balancing loop;
//! - [`experiment`]: presets, deadline calibration, runs and export.

pub mod analysis;
pub mod balancer;
pub mod bandit;
pub mod config;
pub mod error;
pub mod experiment;
pub mod oracle;
pub mod profile;
pub mod reward;
pub mod rng;

pub use config::NetworkConfig;
pub use error::{Error, Result};
pub use profile::{PopulationProfile, RewardScaling, TargetProfile};
