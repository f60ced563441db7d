//! Built-up reward vectors and their policy-weighted aggregates.
//!
//! `m^i` is agent `i`'s estimated branch rewards with the executed branch
//! replaced by the observed reward. The critic learns on the mixed reward
//! `g(m, pi)`; the actors use the lumped reward `l(m, r)` in their advantage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-9;

/// Copy of `estimates` with element `k` replaced by `reward`.
pub fn build_up(estimates: &[f64], k: usize, reward: f64) -> Result<Vec<f64>> {
    if k >= estimates.len() {
        return Err(Error::ActionOutOfRange {
            index: k,
            num_actions: estimates.len(),
        });
    }
    let mut m = estimates.to_vec();
    m[k] = reward;
    Ok(m)
}

/// A probability vector over action branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PolicyWeights(Vec<f64>);

impl PolicyWeights {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidArgument(format!("not a probability vector: {p:?}")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!(
                "policy weights sum to {total}, expected 1"
            )));
        }
        Ok(Self(p))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn one_hot(k: usize, index: usize) -> Result<Self> {
        if index >= k {
            return Err(Error::ActionOutOfRange {
                index,
                num_actions: k,
            });
        }
        let mut p = vec![0.0; k];
        p[index] = 1.0;
        Ok(Self(p))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for PolicyWeights {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PolicyWeights> for Vec<f64> {
    fn from(p: PolicyWeights) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MixFn {
    /// Cross-agent mean of the built-up vectors, weighted by agent `i`'s policy.
    Mo,
    /// Agent `i`'s own built-up vector, weighted by its policy.
    Ss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LumpFn {
    /// Grand mean over agents and branches.
    Mo,
    /// Mean of agent `i`'s vector.
    Smo,
    /// The observed reward itself.
    Ss,
}

fn check_lengths(all: &[Vec<f64>], agent: usize) -> Result<usize> {
    let k = all
        .get(agent)
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidArgument(format!("agent {agent} of {}", all.len())))?;
    if k == 0 || all.iter().any(|m| m.len() != k) {
        return Err(Error::shape("aggregation", "built-up vectors differ in length"));
    }
    Ok(k)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mixed reward of agent `agent`.
pub fn mixed_reward(g: MixFn, all: &[Vec<f64>], agent: usize, weights: &PolicyWeights) -> Result<f64> {
    let k = check_lengths(all, agent)?;
    if weights.len() != k {
        return Err(Error::shape(
            "mixed_reward",
            format!("{} weights for {k} branches", weights.len()),
        ));
    }
    Ok(match g {
        MixFn::Ss => dot(&all[agent], weights.as_slice()),
        MixFn::Mo => {
            let n = all.len() as f64;
            let mean: Vec<f64> = (0..k)
                .map(|j| all.iter().map(|m| m[j]).sum::<f64>() / n)
                .collect();
            dot(&mean, weights.as_slice())
        }
    })
}

/// Lumped reward of agent `agent`; `reward` is its observed reward.
pub fn lumped_reward(l: LumpFn, all: &[Vec<f64>], agent: usize, reward: f64) -> Result<f64> {
    let k = check_lengths(all, agent)?;
    Ok(match l {
        LumpFn::Ss => reward,
        LumpFn::Smo => all[agent].iter().sum::<f64>() / k as f64,
        LumpFn::Mo => all.iter().flatten().sum::<f64>() / (k * all.len()) as f64,
    })
}

/// The five named lumped/mixed combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum AggregationScheme {
    #[default]
    #[serde(rename = "ss-ss")]
    SsSs,
    #[serde(rename = "smo-mo")]
    SmoMo,
    #[serde(rename = "mo-mo")]
    MoMo,
    #[serde(rename = "smo-ss")]
    SmoSs,
    /// Lumped reward only; the critic learns on the observed reward.
    #[serde(rename = "smo-only")]
    SmoOnly,
}

impl AggregationScheme {
    pub const ALL: [AggregationScheme; 5] = [
        AggregationScheme::SsSs,
        AggregationScheme::SmoMo,
        AggregationScheme::MoMo,
        AggregationScheme::SmoSs,
        AggregationScheme::SmoOnly,
    ];

    pub fn lump(self) -> LumpFn {
        match self {
            AggregationScheme::SsSs => LumpFn::Ss,
            AggregationScheme::MoMo => LumpFn::Mo,
            AggregationScheme::SmoMo | AggregationScheme::SmoSs | AggregationScheme::SmoOnly => {
                LumpFn::Smo
            }
        }
    }

    /// `None` when the critic is trained on the observed reward.
    pub fn mix(self) -> Option<MixFn> {
        match self {
            AggregationScheme::SsSs | AggregationScheme::SmoSs => Some(MixFn::Ss),
            AggregationScheme::SmoMo | AggregationScheme::MoMo => Some(MixFn::Mo),
            AggregationScheme::SmoOnly => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AggregationScheme::SsSs => "ss-ss",
            AggregationScheme::SmoMo => "smo-mo",
            AggregationScheme::MoMo => "mo-mo",
            AggregationScheme::SmoSs => "smo-ss",
            AggregationScheme::SmoOnly => "smo-only",
        }
    }

    /// Mixed (critic) and lumped (actor) reward for agent `agent`.
    pub fn rewards(
        self,
        all: &[Vec<f64>],
        agent: usize,
        weights: &PolicyWeights,
        reward: f64,
    ) -> Result<(f64, f64)> {
        let mixed = match self.mix() {
            Some(g) => mixed_reward(g, all, agent, weights)?,
            None => reward,
        };
        Ok((mixed, lumped_reward(self.lump(), all, agent, reward)?))
    }
}

impl fmt::Display for AggregationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for AggregationScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown aggregation scheme `{s}`")))
    }
}
