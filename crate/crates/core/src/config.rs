//! Run configuration: TOML file plus command-line overrides.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregation::AggregationScheme;
use crate::env::Scenario;
use crate::error::{Error, Result};
use crate::estimator::{P2pInput, SampleMode};
use crate::uncertainty::RewardSettingKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Dre,
    P2p,
    Gre,
    None,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Dre,
        EstimatorKind::P2p,
        EstimatorKind::Gre,
        EstimatorKind::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Dre => "dre",
            EstimatorKind::P2p => "p2p",
            EstimatorKind::Gre => "gre",
            EstimatorKind::None => "none",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator `{s}`")))
    }
}

/// Whether every agent learns from the team reward or from its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RewardScope {
    #[default]
    Team,
    Individual,
}

impl fmt::Display for RewardScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardScope::Team => "team",
            RewardScope::Individual => "individual",
        })
    }
}

impl FromStr for RewardScope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "team" => Ok(Self::Team),
            "individual" => Ok(Self::Individual),
            other => Err(Error::InvalidArgument(format!("unknown reward scope `{other}`"))),
        }
    }
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub agents: usize,
    pub reward_setting: RewardSettingKind,
    pub estimator: EstimatorKind,
    pub aggregation: AggregationScheme,
    pub reward_mode: SampleMode,
    pub reward_scope: RewardScope,
    pub p2p_input: P2pInput,
    pub seed: u64,
    pub episodes: usize,

    pub lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub entropy_scale: f64,
    pub alpha: f64,
    pub beta: f64,
    pub clip_epsilon: f64,
    pub buffer_clear_rate: f64,
    pub explore_start: f64,
    pub explore_end: f64,
    pub attention_heads: usize,
    pub head_width: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub leaky_slope: f64,

    pub update_interval: usize,
    pub buffer_capacity: usize,
    pub refresh_interval: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub ac_dist_delta: f64,
    pub dist_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Cn,
            agents: 3,
            reward_setting: RewardSettingKind::Dete,
            estimator: EstimatorKind::Dre,
            aggregation: AggregationScheme::SsSs,
            reward_mode: SampleMode::Mean,
            reward_scope: RewardScope::Team,
            p2p_input: P2pInput::Obs,
            seed: 0,
            episodes: 2000,
            lr: 1e-3,
            gamma: 0.95,
            tau: 0.01,
            batch_size: 1024,
            entropy_scale: 0.3,
            alpha: 0.1,
            beta: 10.0,
            clip_epsilon: 0.2,
            buffer_clear_rate: 0.4,
            explore_start: 0.7,
            explore_end: 0.9,
            attention_heads: 8,
            head_width: 8,
            hidden_layers: 2,
            hidden_units: 64,
            leaky_slope: 0.01,
            update_interval: 4,
            buffer_capacity: 25_000,
            refresh_interval: 100,
            eval_interval: 100,
            eval_episodes: 10,
            ac_dist_delta: crate::uncertainty::AC_DIST_DELTA,
            dist_scale: crate::uncertainty::DIST_SCALE,
        }
    }
}

/// Values given on the command line; each one beats the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub scenario: Option<Scenario>,
    pub agents: Option<usize>,
    pub reward_setting: Option<RewardSettingKind>,
    pub estimator: Option<EstimatorKind>,
    pub aggregation: Option<AggregationScheme>,
    pub reward_mode: Option<SampleMode>,
    pub reward_scope: Option<RewardScope>,
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
}

impl ConfigOverrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.scenario {
            cfg.scenario = v;
        }
        if let Some(v) = self.agents {
            cfg.agents = v;
        }
        if let Some(v) = self.reward_setting {
            cfg.reward_setting = v;
        }
        if let Some(v) = self.estimator {
            cfg.estimator = v;
        }
        if let Some(v) = self.aggregation {
            cfg.aggregation = v;
        }
        if let Some(v) = self.reward_mode {
            cfg.reward_mode = v;
        }
        if let Some(v) = self.reward_scope {
            cfg.reward_scope = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.episodes {
            cfg.episodes = v;
        }
    }
}

fn check(ok: bool, field: &str, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, message()))
    }
}

fn parse_toml(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let field = message
            .split('`')
            .nth(1)
            .filter(|_| message.starts_with("unknown field"))
            .map_or_else(|| "config".to_string(), str::to_string);
        Error::config(field, message)
    })
}

impl RunConfig {
    /// Parses TOML text. Missing keys take their defaults; unknown keys fail.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg = parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (if any), applies `overrides`, and validates.
    pub fn load(path: Option<&Path>, overrides: &ConfigOverrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => parse_toml(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
            None => RunConfig::default(),
        };
        overrides.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            context: "config".into(),
            message: e.to_string(),
        })
    }

    pub fn num_agents(&self) -> usize {
        self.scenario.num_agents(self.agents)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario
            .validate_count(self.agents)
            .map_err(|e| Error::config("agents", e.to_string()))?;
        check(self.seed <= i64::MAX as u64, "seed", || {
            format!("{} does not fit a signed 64-bit integer", self.seed)
        })?;
        check(self.episodes >= 1, "episodes", || "must be at least 1".into())?;
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        check(self.lr > 0.0 && self.lr.is_finite(), "lr", || {
            format!("{} must be positive", self.lr)
        })?;
        check((0.0..1.0).contains(&self.gamma), "gamma", || {
            format!("{} outside [0, 1)", self.gamma)
        })?;
        check(self.tau > 0.0 && self.tau <= 1.0, "tau", || {
            format!("{} outside (0, 1]", self.tau)
        })?;
        check(self.batch_size >= 1, "batch_size", || "must be at least 1".into())?;
        check(self.entropy_scale >= 0.0, "entropy_scale", || {
            format!("{} is negative", self.entropy_scale)
        })?;
        check(self.alpha >= 0.0, "alpha", || format!("{} is negative", self.alpha))?;
        check(self.beta >= 0.0, "beta", || format!("{} is negative", self.beta))?;
        check(self.clip_epsilon > 0.0, "clip_epsilon", || {
            format!("{} must be positive", self.clip_epsilon)
        })?;
        check((0.0..1.0).contains(&self.buffer_clear_rate), "buffer_clear_rate", || {
            format!("{} outside [0, 1)", self.buffer_clear_rate)
        })?;
        check(unit(self.explore_start), "explore_start", || {
            format!("{} outside [0, 1]", self.explore_start)
        })?;
        check(unit(self.explore_end), "explore_end", || {
            format!("{} outside [0, 1]", self.explore_end)
        })?;
        check(self.attention_heads >= 1, "attention_heads", || "must be at least 1".into())?;
        check(self.head_width >= 1, "head_width", || "must be at least 1".into())?;
        check(self.hidden_units >= 1, "hidden_units", || "must be at least 1".into())?;
        check(self.leaky_slope > 0.0 && self.leaky_slope < 1.0, "leaky_slope", || {
            format!("{} outside (0, 1)", self.leaky_slope)
        })?;
        check(self.update_interval >= 1, "update_interval", || "must be at least 1".into())?;
        check(self.buffer_capacity >= 1, "buffer_capacity", || "must be at least 1".into())?;
        check(self.refresh_interval >= 1, "refresh_interval", || "must be at least 1".into())?;
        check(self.eval_interval >= 1, "eval_interval", || "must be at least 1".into())?;
        check(self.eval_episodes >= 2, "eval_episodes", || {
            "need at least 2 episodes for a standard error".into()
        })?;
        check(self.ac_dist_delta > 0.0, "ac_dist_delta", || {
            format!("{} must be positive", self.ac_dist_delta)
        })?;
        check(self.dist_scale >= 0.0, "dist_scale", || {
            format!("{} is negative", self.dist_scale)
        })?;
        Ok(())
    }

    pub(crate) fn hidden(&self) -> Vec<usize> {
        vec![self.hidden_units; self.hidden_layers]
    }

    /// Probability of acting on-policy rather than uniformly at random:
    /// linear from `explore_start` to `explore_end` over the first half of
    /// training, then flat.
    pub fn exploration(&self, episode: usize) -> f64 {
        let half = (self.episodes as f64 / 2.0).max(1.0);
        let frac = (episode as f64 / half).min(1.0);
        self.explore_start + (self.explore_end - self.explore_start) * frac
    }
}
