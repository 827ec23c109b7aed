//! Probability vectors over the servers: the realized population profile,
//! the load balancer's reward scalings and the operator's target.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIMPLEX_TOL: f64 = 1e-9;

fn check_simplex(what: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::NotOnSimplex(format!("{what} is empty")));
    }
    if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::NotOnSimplex(format!(
            "{what} has a negative or non-finite component {x}"
        )));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::NotOnSimplex(format!(
            "{what} sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Fraction of agents on each server in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PopulationProfile(Vec<f64>);

impl PopulationProfile {
    pub fn new(f: Vec<f64>) -> Result<Self> {
        check_simplex("population profile", &f)?;
        Ok(Self(f))
    }

    pub fn from_counts(counts: &[usize], agents: usize) -> Self {
        let m = agents as f64;
        Self(counts.iter().map(|&c| c as f64 / m).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn arms(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for PopulationProfile {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Per-server reward multipliers.
///
/// The optimizer keeps these on the unit simplex; analysis code may also
/// build unnormalized multipliers in `[0, 1]^n` with [`RewardScaling::multipliers`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RewardScaling(Vec<f64>);

impl RewardScaling {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        check_simplex("reward scaling", &alpha)?;
        Ok(Self(alpha))
    }

    pub fn uniform(arms: usize) -> Self {
        Self(vec![1.0 / arms as f64; arms])
    }

    pub fn multipliers(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidConfig("reward scaling is empty".into()));
        }
        for &a in &alpha {
            crate::error::check_unit("alpha", a)?;
        }
        Ok(Self(alpha))
    }

    /// Only for values produced by the simplex projection.
    pub(crate) fn from_projection(alpha: Vec<f64>) -> Self {
        Self(alpha)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn arms(&self) -> usize {
        self.0.len()
    }

    pub fn is_on_simplex(&self) -> bool {
        check_simplex("", &self.0).is_ok()
    }
}

impl std::ops::Index<usize> for RewardScaling {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Desired population profile; every component strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TargetProfile(Vec<f64>);

impl TargetProfile {
    pub fn new(f_star: Vec<f64>) -> Result<Self> {
        check_simplex("target profile", &f_star)?;
        if f_star.len() > 1 && f_star.iter().any(|&x| x <= 0.0 || x >= 1.0) {
            return Err(Error::NotOnSimplex(
                "target profile components must lie strictly inside (0, 1)".into(),
            ));
        }
        Ok(Self(f_star))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn arms(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for TargetProfile {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TargetProfile> for Vec<f64> {
    fn from(t: TargetProfile) -> Self {
        t.0
    }
}
