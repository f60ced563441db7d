//! Reward uncertainty injected on top of deterministic scenario rewards.
//!
//! - `dete`: the reward as computed by the scenario.
//! - `dist`: natural disturbance, `0.05 * N(r, 1) + r`.
//! - `ac-dist`: action-dependent offset, `N(k, delta) + r` for action index `k`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const AC_DIST_DELTA: f64 = 0.001;
pub const DIST_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RewardSettingKind {
    #[serde(rename = "dete")]
    Dete,
    #[serde(rename = "dist")]
    Dist,
    #[serde(rename = "ac-dist")]
    AcDist,
}

impl RewardSettingKind {
    pub fn name(self) -> &'static str {
        match self {
            RewardSettingKind::Dete => "dete",
            RewardSettingKind::Dist => "dist",
            RewardSettingKind::AcDist => "ac-dist",
        }
    }
}

impl fmt::Display for RewardSettingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for RewardSettingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dete" => Ok(Self::Dete),
            "dist" => Ok(Self::Dist),
            "ac-dist" | "ac_dist" => Ok(Self::AcDist),
            other => Err(Error::InvalidArgument(format!("unknown reward setting `{other}`"))),
        }
    }
}

/// A reward setting together with its own random stream.
#[derive(Debug, Clone)]
pub struct RewardSetting {
    kind: RewardSettingKind,
    /// Standard deviation of the action-branch Gaussian.
    delta: f64,
    scale: f64,
    num_actions: usize,
    rng: ChaCha8Rng,
}

impl RewardSetting {
    pub fn new(kind: RewardSettingKind, num_actions: usize, seed: u64) -> Self {
        Self::with_params(kind, num_actions, seed, AC_DIST_DELTA, DIST_SCALE)
            .expect("default parameters are valid")
    }

    pub fn with_params(
        kind: RewardSettingKind,
        num_actions: usize,
        seed: u64,
        delta: f64,
        scale: f64,
    ) -> Result<Self> {
        if !(delta > 0.0) || !(scale >= 0.0) || num_actions == 0 {
            return Err(Error::InvalidArgument(format!(
                "reward setting needs delta > 0, scale >= 0, actions > 0 (got {delta}, {scale}, {num_actions})"
            )));
        }
        Ok(Self {
            kind,
            delta,
            scale,
            num_actions,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn kind(&self) -> RewardSettingKind {
        self.kind
    }

    pub fn perturb(&mut self, r_dete: f64, action: usize) -> Result<f64> {
        if action >= self.num_actions {
            return Err(Error::ActionOutOfRange {
                index: action,
                num_actions: self.num_actions,
            });
        }
        Ok(match self.kind {
            RewardSettingKind::Dete => r_dete,
            RewardSettingKind::Dist => {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                self.scale * (r_dete + z) + r_dete
            }
            RewardSettingKind::AcDist => {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                action as f64 + self.delta * z + r_dete
            }
        })
    }
}
