//! Reward estimators.
//!
//! [`DreEstimator`] keeps one Gaussian per action branch and is trained with
//! the branch negative log likelihood plus `alpha * |sigma|_1 + beta * var(mu)`.
//! [`P2pEstimator`] is plain squared-error regression to a scalar and
//! [`GreEstimator`] conditions a distributional head on the joint
//! observation and joint action of all agents.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AdamConfig, Graph, Mlp, MlpSpec, ParamStore, Tensor, Var};

pub const SIGMA_FLOOR: f64 = 1e-4;

/// Gaussian parameters of every action branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBeliefs {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl RewardBeliefs {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() || mean.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "beliefs need matching non-empty mean/std, got {} and {}",
                mean.len(),
                std.len()
            )));
        }
        if mean.iter().chain(&std).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reward beliefs".into()));
        }
        if std.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidArgument(format!("non-positive stdev in {std:?}")));
        }
        Ok(Self { mean, std })
    }

    pub fn num_branches(&self) -> usize {
        self.mean.len()
    }

    fn from_head(raw: &[f64]) -> Result<Self> {
        let k = raw.len() / 2;
        let mean = raw[..k].to_vec();
        let std = raw[k..].iter().map(|&v| head_sigma(v)).collect();
        Self::new(mean, std)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn head_sigma(raw: f64) -> f64 {
    softplus(raw).max(SIGMA_FLOOR)
}

/// Weights of the distribution regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerCoeffs {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for RegularizerCoeffs {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 10.0,
        }
    }
}

impl RegularizerCoeffs {
    pub const NONE: RegularizerCoeffs = RegularizerCoeffs {
        alpha: 0.0,
        beta: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if self.alpha >= 0.0 && self.beta >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "regularizer coefficients must be non-negative: {self:?}"
            )))
        }
    }
}

/// Gaussian negative log likelihood of `reward` under branch `k`.
pub fn nll_loss(beliefs: &RewardBeliefs, k: usize, reward: f64) -> Result<f64> {
    let (mu, sigma) = match (beliefs.mean.get(k), beliefs.std.get(k)) {
        (Some(&m), Some(&s)) => (m, s),
        _ => {
            return Err(Error::ActionOutOfRange {
                index: k,
                num_actions: beliefs.num_branches(),
            })
        }
    };
    if sigma <= 0.0 {
        return Err(Error::InvalidArgument(format!("stdev {sigma} must be positive")));
    }
    let z = (reward - mu) / sigma;
    Ok(0.5 * (2.0 * PI * sigma * sigma).ln() + 0.5 * z * z)
}

/// `alpha * sum(sigma) + beta * population_variance(mu)`.
pub fn regularizer(beliefs: &RewardBeliefs, coeffs: RegularizerCoeffs) -> Result<f64> {
    coeffs.validate()?;
    let k = beliefs.num_branches() as f64;
    let mean = beliefs.mean.iter().sum::<f64>() / k;
    let var = beliefs.mean.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / k;
    Ok(coeffs.alpha * beliefs.std.iter().sum::<f64>() + coeffs.beta * var)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    #[default]
    Mean,
    Sample,
}

impl FromStr for SampleMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "sample" => Ok(Self::Sample),
            other => Err(Error::InvalidArgument(format!("unknown reward mode `{other}`"))),
        }
    }
}

impl fmt::Display for SampleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleMode::Mean => "mean",
            SampleMode::Sample => "sample",
        })
    }
}

/// Branch rewards from beliefs: the means, or one independent draw per branch.
pub fn sample_or_mean<R: Rng + ?Sized>(
    beliefs: &RewardBeliefs,
    mode: SampleMode,
    rng: &mut R,
) -> Vec<f64> {
    match mode {
        SampleMode::Mean => beliefs.mean.clone(),
        SampleMode::Sample => beliefs
            .mean
            .iter()
            .zip(&beliefs.std)
            .map(|(&m, &s)| {
                let z: f64 = StandardNormal.sample(rng);
                m + s * z
            })
            .collect(),
    }
}

/// `(observation, executed action, observed reward)` triples, one per row.
#[derive(Debug, Clone)]
pub struct EstimatorBatch {
    pub obs: Tensor,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl EstimatorBatch {
    pub fn new(obs: Tensor, actions: Vec<usize>, rewards: Vec<f64>) -> Result<Self> {
        if obs.rows() != actions.len() || actions.len() != rewards.len() || actions.is_empty() {
            return Err(Error::shape(
                "EstimatorBatch",
                format!(
                    "{} observations, {} actions, {} rewards",
                    obs.rows(),
                    actions.len(),
                    rewards.len()
                ),
            ));
        }
        Ok(Self { obs, actions, rewards })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Observations uniform in `[-1, 1]^width`, actions uniform, and branch `k`
/// rewards drawn from `N(k, noise_std)`.
pub fn synthetic_branch_batch<R: Rng + ?Sized>(
    rng: &mut R,
    batch: usize,
    width: usize,
    num_actions: usize,
    noise_std: f64,
) -> EstimatorBatch {
    let noise = Normal::new(0.0, noise_std).expect("valid stdev");
    let obs: Vec<f64> = (0..batch * width).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let actions: Vec<usize> = (0..batch).map(|_| rng.random_range(0..num_actions)).collect();
    let rewards = actions.iter().map(|&k| k as f64 + noise.sample(rng)).collect();
    EstimatorBatch::new(
        Tensor::matrix(batch, width, obs).expect("sized"),
        actions,
        rewards,
    )
    .expect("sized")
}

/// Per-sample `nll + regularizer` for a `[batch x K]` mean head and a
/// `[batch x K]` pre-softplus stdev head. Returns `[batch x 1]`.
fn gaussian_head_loss(
    g: &mut Graph,
    mu: Var,
    raw_sigma: Var,
    actions: &[usize],
    rewards: &[f64],
    coeffs: RegularizerCoeffs,
) -> Result<Var> {
    let rows = g.value(mu).rows();
    let k = g.value(mu).cols();
    let sp = g.softplus(raw_sigma)?;
    let sigma = g.clamp_min(sp, SIGMA_FLOOR)?;
    let mu_k = g.gather(mu, actions)?;
    let sigma_k = g.gather(sigma, actions)?;
    let r = g.input(Tensor::matrix(rows, 1, rewards.to_vec())?)?;
    let resid = g.sub(r, mu_k)?;
    let z = g.div(resid, sigma_k)?;
    let z2 = g.square(z)?;
    let quad = g.scale(z2, 0.5)?;
    let log_sigma = g.ln(sigma_k)?;
    let nll = g.add(quad, log_sigma)?;
    let nll = g.add_scalar(nll, 0.5 * (2.0 * PI).ln())?;

    let sigma_sum = g.sum_cols(sigma)?;
    let sigma_term = g.scale(sigma_sum, coeffs.alpha)?;

    let avg = g.input(Tensor::full(&[k, 1], 1.0 / k as f64))?;
    let spread = g.input(Tensor::full(&[1, k], 1.0))?;
    let mu_mean = g.matmul(mu, avg)?;
    let mu_mean_b = g.matmul(mu_mean, spread)?;
    let dev = g.sub(mu, mu_mean_b)?;
    let dev2 = g.square(dev)?;
    let ss = g.sum_cols(dev2)?;
    let var_term = g.scale(ss, coeffs.beta / k as f64)?;

    let reg = g.add(sigma_term, var_term)?;
    g.add(nll, reg)
}

fn check_actions(actions: &[usize], num_actions: usize) -> Result<()> {
    match actions.iter().find(|&&k| k >= num_actions) {
        Some(&index) => Err(Error::ActionOutOfRange { index, num_actions }),
        None => Ok(()),
    }
}

/// Multi-action-branch distributional estimator for one agent.
#[derive(Debug, Clone)]
pub struct DreEstimator {
    mlp: Mlp,
    params: ParamStore,
    num_actions: usize,
}

impl DreEstimator {
    pub fn new<R: Rng + ?Sized>(
        obs_width: usize,
        num_actions: usize,
        hidden: Vec<usize>,
        slope: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let spec = MlpSpec {
            input: obs_width,
            hidden,
            output: 2 * num_actions,
            slope,
        };
        let mlp = Mlp::new(spec, "")?;
        let mut params = ParamStore::new();
        mlp.init(&mut params, rng)?;
        Ok(Self {
            mlp,
            params,
            num_actions,
        })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn estimate(&self, obs: &[f64]) -> Result<RewardBeliefs> {
        let mut all = self.estimate_batch(Tensor::row(obs.to_vec()))?;
        Ok(all.remove(0))
    }

    pub fn estimate_batch(&self, obs: Tensor) -> Result<Vec<RewardBeliefs>> {
        let out = self.mlp.eval(&self.params, obs)?;
        (0..out.rows())
            .map(|r| RewardBeliefs::from_head(out.row_slice(r)))
            .collect()
    }

    /// Mean of per-sample loss, recorded on `g`.
    pub fn batch_loss(
        &self,
        g: &mut Graph,
        batch: &EstimatorBatch,
        coeffs: RegularizerCoeffs,
    ) -> Result<Var> {
        check_actions(&batch.actions, self.num_actions)?;
        let x = g.input(batch.obs.clone())?;
        let out = self.mlp.forward(g, &self.params, x)?;
        let mu = g.col_slice(out, 0, self.num_actions)?;
        let raw = g.col_slice(out, self.num_actions, self.num_actions)?;
        let per_sample = gaussian_head_loss(g, mu, raw, &batch.actions, &batch.rewards, coeffs)?;
        g.mean(per_sample)
    }

    /// One Adam step; returns the loss before the step.
    pub fn update(
        &mut self,
        batch: &EstimatorBatch,
        coeffs: RegularizerCoeffs,
        adam: &AdamConfig,
    ) -> Result<f64> {
        coeffs.validate()?;
        let mut g = Graph::new();
        let loss = self.batch_loss(&mut g, batch, coeffs)?;
        let value = g.value(loss).item();
        let grads = g.backward(loss)?;
        self.params.adam_step(&grads, adam)?;
        Ok(value)
    }
}

/// What the point-to-point regressor sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum P2pInput {
    /// Observation only: a single prediction per observation.
    #[default]
    Obs,
    /// Observation concatenated with the one-hot action.
    ObsAction,
}

/// Point-to-point squared-error reward regressor.
#[derive(Debug, Clone)]
pub struct P2pEstimator {
    mlp: Mlp,
    params: ParamStore,
    num_actions: usize,
    obs_width: usize,
    input: P2pInput,
}

impl P2pEstimator {
    pub fn new<R: Rng + ?Sized>(
        obs_width: usize,
        num_actions: usize,
        input: P2pInput,
        hidden: Vec<usize>,
        slope: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let width = match input {
            P2pInput::Obs => obs_width,
            P2pInput::ObsAction => obs_width + num_actions,
        };
        let mlp = Mlp::new(
            MlpSpec {
                input: width,
                hidden,
                output: 1,
                slope,
            },
            "",
        )?;
        let mut params = ParamStore::new();
        mlp.init(&mut params, rng)?;
        Ok(Self {
            mlp,
            params,
            num_actions,
            obs_width,
            input,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn input_kind(&self) -> P2pInput {
        self.input
    }

    fn encode(&self, obs: &Tensor, actions: &[usize]) -> Result<Tensor> {
        if obs.cols() != self.obs_width || obs.rows() != actions.len() {
            return Err(Error::shape(
                "p2p input",
                format!("{:?} with {} actions", obs.shape(), actions.len()),
            ));
        }
        check_actions(actions, self.num_actions)?;
        match self.input {
            P2pInput::Obs => Ok(obs.clone()),
            P2pInput::ObsAction => {
                let w = self.obs_width + self.num_actions;
                let mut values = Vec::with_capacity(obs.rows() * w);
                for (r, &k) in actions.iter().enumerate() {
                    values.extend_from_slice(obs.row_slice(r));
                    values.extend((0..self.num_actions).map(|j| f64::from(u8::from(j == k))));
                }
                Tensor::matrix(obs.rows(), w, values)
            }
        }
    }

    /// Scalar prediction for each `(obs row, action)`.
    pub fn predict_batch(&self, obs: &Tensor, actions: &[usize]) -> Result<Vec<f64>> {
        let x = self.encode(obs, actions)?;
        Ok(self.mlp.eval(&self.params, x)?.into_values())
    }

    pub fn predict(&self, obs: &[f64], action: usize) -> Result<f64> {
        Ok(self.predict_batch(&Tensor::row(obs.to_vec()), &[action])?[0])
    }

    /// Predictions for every branch of every row: `rows x K`.
    pub fn branch_estimates(&self, obs: &Tensor) -> Result<Vec<Vec<f64>>> {
        let rows = obs.rows();
        match self.input {
            P2pInput::Obs => {
                let v = self.predict_batch(obs, &vec![0; rows])?;
                Ok(v.into_iter().map(|p| vec![p; self.num_actions]).collect())
            }
            P2pInput::ObsAction => {
                let mut out = vec![vec![0.0; self.num_actions]; rows];
                for k in 0..self.num_actions {
                    let v = self.predict_batch(obs, &vec![k; rows])?;
                    for (row, p) in out.iter_mut().zip(v) {
                        row[k] = p;
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn batch_loss(&self, g: &mut Graph, batch: &EstimatorBatch) -> Result<Var> {
        let x = self.encode(&batch.obs, &batch.actions)?;
        let x = g.input(x)?;
        let pred = self.mlp.forward(g, &self.params, x)?;
        let r = g.input(Tensor::matrix(batch.len(), 1, batch.rewards.clone())?)?;
        let diff = g.sub(pred, r)?;
        let sq = g.square(diff)?;
        g.mean(sq)
    }

    pub fn update(&mut self, batch: &EstimatorBatch, adam: &AdamConfig) -> Result<f64> {
        let mut g = Graph::new();
        let loss = self.batch_loss(&mut g, batch)?;
        let value = g.value(loss).item();
        let grads = g.backward(loss)?;
        self.params.adam_step(&grads, adam)?;
        Ok(value)
    }
}

/// Joint samples for the global estimator: every row carries all agents.
#[derive(Debug, Clone)]
pub struct JointBatch {
    /// `[batch x agents * obs_width]`
    pub joint_obs: Tensor,
    /// `batch x agents`
    pub actions: Vec<Vec<usize>>,
    /// `batch x agents`
    pub rewards: Vec<Vec<f64>>,
}

/// Distributional estimator conditioned on joint observation and joint
/// action. One Gaussian head of `K` branches per agent.
#[derive(Debug, Clone)]
pub struct GreEstimator {
    mlp: Mlp,
    params: ParamStore,
    agents: usize,
    obs_width: usize,
    num_actions: usize,
}

impl GreEstimator {
    pub fn new<R: Rng + ?Sized>(
        agents: usize,
        obs_width: usize,
        num_actions: usize,
        hidden: Vec<usize>,
        slope: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mlp = Mlp::new(
            MlpSpec {
                input: agents * (obs_width + num_actions),
                hidden,
                output: 2 * agents * num_actions,
                slope,
            },
            "",
        )?;
        let mut params = ParamStore::new();
        mlp.init(&mut params, rng)?;
        Ok(Self {
            mlp,
            params,
            agents,
            obs_width,
            num_actions,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn encode(&self, joint_obs: &Tensor, actions: &[Vec<usize>]) -> Result<Tensor> {
        let rows = joint_obs.rows();
        if joint_obs.cols() != self.agents * self.obs_width
            || actions.len() != rows
            || actions.iter().any(|a| a.len() != self.agents)
        {
            return Err(Error::shape(
                "gre input",
                format!("{:?} with {} joint actions", joint_obs.shape(), actions.len()),
            ));
        }
        let w = self.agents * (self.obs_width + self.num_actions);
        let mut values = Vec::with_capacity(rows * w);
        for (r, joint) in actions.iter().enumerate() {
            check_actions(joint, self.num_actions)?;
            values.extend_from_slice(joint_obs.row_slice(r));
            for &k in joint {
                values.extend((0..self.num_actions).map(|j| f64::from(u8::from(j == k))));
            }
        }
        Tensor::matrix(rows, w, values)
    }

    /// Beliefs of each agent for each row: `rows x agents`.
    pub fn estimate_batch(
        &self,
        joint_obs: &Tensor,
        actions: &[Vec<usize>],
    ) -> Result<Vec<Vec<RewardBeliefs>>> {
        let out = self.mlp.eval(&self.params, self.encode(joint_obs, actions)?)?;
        let span = 2 * self.num_actions;
        (0..out.rows())
            .map(|r| {
                let row = out.row_slice(r);
                (0..self.agents)
                    .map(|i| RewardBeliefs::from_head(&row[i * span..(i + 1) * span]))
                    .collect()
            })
            .collect()
    }

    pub fn batch_loss(
        &self,
        g: &mut Graph,
        batch: &JointBatch,
        coeffs: RegularizerCoeffs,
    ) -> Result<Var> {
        if batch.rewards.len() != batch.actions.len()
            || batch.rewards.iter().any(|r| r.len() != self.agents)
        {
            return Err(Error::shape("gre batch", "reward rows do not match agents"));
        }
        let x = g.input(self.encode(&batch.joint_obs, &batch.actions)?)?;
        let out = self.mlp.forward(g, &self.params, x)?;
        let k = self.num_actions;
        let mut per_agent = Vec::with_capacity(self.agents);
        for i in 0..self.agents {
            let mu = g.col_slice(out, i * 2 * k, k)?;
            let raw = g.col_slice(out, i * 2 * k + k, k)?;
            let acts: Vec<usize> = batch.actions.iter().map(|a| a[i]).collect();
            let rews: Vec<f64> = batch.rewards.iter().map(|r| r[i]).collect();
            per_agent.push(gaussian_head_loss(g, mu, raw, &acts, &rews, coeffs)?);
        }
        let all = g.concat_cols(&per_agent)?;
        g.mean(all)
    }

    pub fn update(
        &mut self,
        batch: &JointBatch,
        coeffs: RegularizerCoeffs,
        adam: &AdamConfig,
    ) -> Result<f64> {
        coeffs.validate()?;
        let mut g = Graph::new();
        let loss = self.batch_loss(&mut g, batch, coeffs)?;
        let value = g.value(loss).item();
        let grads = g.backward(loss)?;
        self.params.adam_step(&grads, adam)?;
        Ok(value)
    }
}
