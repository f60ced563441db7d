//! Centralized-critic, decentralized-actor training loop.
//!
//! Every `update_interval` episodes the trainer runs, in order: one estimator
//! step, reward reconstruction and aggregation, one critic step on the mixed
//! reward, one actor step per agent on the clipped advantage built from the
//! lumped reward, and a soft update of every target network. Each stage draws
//! its own uniform batch from the replay buffer.

mod buffer;
mod nets;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::time::{Duration, Instant};

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

pub use buffer::{ReplayBuffer, Transition};
pub use nets::{clipped_surrogate, Actor, ActorBatch, Critic, PROB_FLOOR};

use crate::aggregation::{build_up, PolicyWeights};
use crate::config::{EstimatorKind, RewardScope, RunConfig};
use crate::env::{World, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::estimator::{
    sample_or_mean, DreEstimator, EstimatorBatch, GreEstimator, JointBatch, P2pEstimator,
    RegularizerCoeffs, RewardBeliefs,
};
use crate::nn::{AdamConfig, GatSpec, Tensor};
use crate::uncertainty::RewardSetting;

const STREAM_INIT: u64 = 1;
const STREAM_ENV: u64 = 2;
const STREAM_ACT: u64 = 3;
const STREAM_BATCH: u64 = 4;
const STREAM_REWARD: u64 = 5;
const STREAM_EVAL: u64 = 6;
const STREAM_MODE: u64 = 7;

/// Independent generator `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How actions are chosen during a rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionRule {
    /// With probability `p` sample from the policy, otherwise uniform.
    Explore(f64),
    /// Highest-probability action.
    Greedy,
}

/// One rollout.
#[derive(Debug, Clone)]
pub struct Episode {
    pub transitions: Vec<Transition>,
    /// Sum over steps of the team reward (sum of perturbed individual rewards).
    pub team_return: f64,
}

fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Runs `world` to the end of its episode.
pub fn collect_episode<R: Rng + ?Sized>(
    mut world: World,
    actors: &[Actor],
    setting: &mut RewardSetting,
    scope: RewardScope,
    rule: ActionRule,
    rng: &mut R,
) -> Result<Episode> {
    let n = world.num_agents();
    if actors.len() != n {
        return Err(Error::InvalidArgument(format!("{} actors for {n} agents", actors.len())));
    }
    let mut obs = world.observations();
    let mut transitions = Vec::new();
    let mut team_return = 0.0;
    while !world.is_done() {
        let mut policies = Vec::with_capacity(n);
        let mut actions = Vec::with_capacity(n);
        for (actor, o) in actors.iter().zip(&obs) {
            let p = actor.policy(o)?;
            let a = match rule {
                ActionRule::Greedy => argmax(&p),
                ActionRule::Explore(explore) => {
                    if rng.random::<f64>() < explore {
                        WeightedIndex::new(&p)
                            .map_err(|e| Error::InvalidArgument(format!("policy {p:?}: {e}")))?
                            .sample(rng)
                    } else {
                        rng.random_range(0..p.len())
                    }
                }
            };
            policies.push(p);
            actions.push(a);
        }
        let step = world.step(&actions)?;
        let perturbed = step
            .rewards
            .iter()
            .zip(&actions)
            .map(|(&r, &a)| setting.perturb(r, a))
            .collect::<Result<Vec<f64>>>()?;
        let team: f64 = perturbed.iter().sum();
        team_return += team;
        let rewards = match scope {
            RewardScope::Team => vec![team; n],
            RewardScope::Individual => perturbed,
        };
        transitions.push(Transition {
            obs: std::mem::replace(&mut obs, step.observations.clone()),
            policies,
            actions,
            rewards,
            next_obs: step.observations,
        });
    }
    Ok(Episode {
        transitions,
        team_return,
    })
}

/// Reward estimators of a run.
#[derive(Debug, Clone)]
pub enum Estimators {
    None,
    Dre(Vec<DreEstimator>),
    P2p(Vec<P2pEstimator>),
    Gre(GreEstimator),
}

/// Rewards derived from a batch: per sample, per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapedRewards {
    /// Critic reward `R-bar`.
    pub mixed: Vec<Vec<f64>>,
    /// Actor reward `r-bar`.
    pub lumped: Vec<Vec<f64>>,
}

/// Mean and standard error of greedy evaluation returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mean: f64,
    pub stderr: f64,
    pub returns: Vec<f64>,
}

impl EvalSummary {
    pub fn from_returns(returns: Vec<f64>) -> Result<Self> {
        if returns.len() < 2 {
            return Err(Error::InvalidArgument(
                "standard error needs at least two returns".into(),
            ));
        }
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            mean,
            stderr: (var / n).sqrt(),
            returns,
        })
    }
}

/// One line of the metric stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub episode: usize,
    pub eval_mean_reward: f64,
    pub eval_stderr: f64,
    /// Means over the updates since the previous record; `None` before the first update.
    pub critic_loss: Option<f64>,
    pub actor_objective: Option<f64>,
    pub estimator_loss: Option<f64>,
}

pub fn write_metrics<W: Write>(mut out: W, records: &[MetricRecord]) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Parse {
            context: "metric record".into(),
            message: e.to_string(),
        })?;
        writeln!(out, "{line}").map_err(|e| Error::io("metrics", e))?;
    }
    Ok(())
}

pub fn read_metrics<R: BufRead>(input: R) -> Result<Vec<MetricRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("metrics", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            context: format!("metrics line {}", i + 1),
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Update statistics of one update event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub estimator_loss: Option<f64>,
    pub critic_loss: f64,
    pub actor_objective: f64,
}

#[derive(Debug, Default)]
struct Running {
    critic: Vec<f64>,
    actor: Vec<f64>,
    estimator: Vec<f64>,
}

fn mean_of(v: &mut Vec<f64>) -> Option<f64> {
    let out = (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    v.clear();
    out
}

/// Parameter dump keyed by `module.parameter` name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub params: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self).map_err(|e| Error::Parse {
            context: "checkpoint".into(),
            message: e.to_string(),
        })
    }

    pub fn read<R: std::io::Read>(input: R) -> Result<Self> {
        serde_json::from_reader(input).map_err(|e| Error::Parse {
            context: "checkpoint".into(),
            message: e.to_string(),
        })
    }
}

/// Result of [`Trainer::run`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<MetricRecord>,
    pub final_eval: EvalSummary,
    pub checkpoint: Checkpoint,
}

fn stack(rows: impl Iterator<Item = Vec<f64>>, cols: usize) -> Result<Tensor> {
    let values: Vec<f64> = rows.flatten().collect();
    Tensor::matrix(values.len() / cols.max(1), cols, values)
}

/// Whole-run state.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: RunConfig,
    agents: usize,
    obs_width: usize,
    actors: Vec<Actor>,
    critic: Critic,
    estimators: Estimators,
    buffer: ReplayBuffer,
    setting: RewardSetting,
    adam: AdamConfig,
    env_rng: ChaCha8Rng,
    act_rng: ChaCha8Rng,
    batch_rng: ChaCha8Rng,
    mode_rng: ChaCha8Rng,
    eval_seeds: Vec<u64>,
    episode: usize,
}

impl Trainer {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let agents = cfg.num_agents();
        let obs_width = cfg.scenario.obs_width(cfg.agents);
        let hidden = cfg.hidden();
        let mut init = stream_rng(cfg.seed, STREAM_INIT);
        let actors = (0..agents)
            .map(|_| Actor::new(obs_width, NUM_ACTIONS, hidden.clone(), cfg.leaky_slope, &mut init))
            .collect::<Result<Vec<_>>>()?;
        let spec = GatSpec {
            input: obs_width,
            heads: cfg.attention_heads,
            head_width: cfg.head_width,
            hidden: hidden.clone(),
            slope: cfg.leaky_slope,
        };
        let critic = Critic::new(spec, &mut init)?;
        let estimators = match cfg.estimator {
            EstimatorKind::None => Estimators::None,
            EstimatorKind::Dre => Estimators::Dre(
                (0..agents)
                    .map(|_| {
                        DreEstimator::new(obs_width, NUM_ACTIONS, hidden.clone(), cfg.leaky_slope, &mut init)
                    })
                    .collect::<Result<_>>()?,
            ),
            EstimatorKind::P2p => Estimators::P2p(
                (0..agents)
                    .map(|_| {
                        P2pEstimator::new(
                            obs_width,
                            NUM_ACTIONS,
                            cfg.p2p_input,
                            hidden.clone(),
                            cfg.leaky_slope,
                            &mut init,
                        )
                    })
                    .collect::<Result<_>>()?,
            ),
            EstimatorKind::Gre => Estimators::Gre(GreEstimator::new(
                agents,
                obs_width,
                NUM_ACTIONS,
                hidden.clone(),
                cfg.leaky_slope,
                &mut init,
            )?),
        };
        let setting = RewardSetting::with_params(
            cfg.reward_setting,
            NUM_ACTIONS,
            stream_rng(cfg.seed, STREAM_REWARD).next_u64(),
            cfg.ac_dist_delta,
            cfg.dist_scale,
        )?;
        let mut eval_rng = stream_rng(cfg.seed, STREAM_EVAL);
        let eval_seeds = (0..cfg.eval_episodes).map(|_| eval_rng.next_u64()).collect();
        Ok(Self {
            agents,
            obs_width,
            actors,
            critic,
            estimators,
            buffer: ReplayBuffer::new(cfg.buffer_capacity)?,
            setting,
            adam: AdamConfig::with_lr(cfg.lr),
            env_rng: stream_rng(cfg.seed, STREAM_ENV),
            act_rng: stream_rng(cfg.seed, STREAM_ACT),
            batch_rng: stream_rng(cfg.seed, STREAM_BATCH),
            mode_rng: stream_rng(cfg.seed, STREAM_MODE),
            eval_seeds,
            episode: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn num_agents(&self) -> usize {
        self.agents
    }

    pub fn obs_width(&self) -> usize {
        self.obs_width
    }

    pub fn actors(&self) -> &[Actor] {
        &self.actors
    }

    pub fn actors_mut(&mut self) -> &mut [Actor] {
        &mut self.actors
    }

    pub fn critic(&self) -> &Critic {
        &self.critic
    }

    pub fn critic_mut(&mut self) -> &mut Critic {
        &mut self.critic
    }

    pub fn estimators(&self) -> &Estimators {
        &self.estimators
    }

    pub fn estimators_mut(&mut self) -> &mut Estimators {
        &mut self.estimators
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn buffer_mut(&mut self) -> &mut ReplayBuffer {
        &mut self.buffer
    }

    /// Training episodes completed so far.
    pub fn episode(&self) -> usize {
        self.episode
    }

    fn new_world(&mut self) -> Result<World> {
        let seed = self.env_rng.next_u64();
        Ok(World::reset(self.cfg.scenario, self.cfg.agents, seed)?.0)
    }

    /// Collects one training episode into the buffer.
    pub fn collect(&mut self, rule: ActionRule) -> Result<Episode> {
        let world = self.new_world()?;
        let ep = collect_episode(
            world,
            &self.actors,
            &mut self.setting,
            self.cfg.reward_scope,
            rule,
            &mut self.act_rng,
        )?;
        self.buffer.extend(ep.transitions.iter().cloned());
        Ok(ep)
    }

    /// Greedy episodes on the run's fixed evaluation seeds.
    pub fn evaluate(&self) -> Result<EvalSummary> {
        let mut returns = Vec::with_capacity(self.eval_seeds.len());
        for &seed in &self.eval_seeds {
            let (world, _) = World::reset(self.cfg.scenario, self.cfg.agents, seed)?;
            let mut setting = RewardSetting::with_params(
                self.cfg.reward_setting,
                NUM_ACTIONS,
                seed ^ 0x5eed,
                self.cfg.ac_dist_delta,
                self.cfg.dist_scale,
            )?;
            let mut rng = stream_rng(seed, 0);
            let ep = collect_episode(
                world,
                &self.actors,
                &mut setting,
                self.cfg.reward_scope,
                ActionRule::Greedy,
                &mut rng,
            )?;
            returns.push(ep.team_return);
        }
        EvalSummary::from_returns(returns)
    }

    fn agent_obs(&self, batch: &[&Transition], agent: usize, next: bool) -> Result<Tensor> {
        stack(
            batch
                .iter()
                .map(|t| if next { t.next_obs[agent].clone() } else { t.obs[agent].clone() }),
            self.obs_width,
        )
    }

    /// Critic input: row `b * agents + i` holds agent `i`'s observation.
    pub fn nodes(&self, batch: &[&Transition], next: bool) -> Result<Tensor> {
        stack(
            batch
                .iter()
                .flat_map(|t| if next { t.next_obs.clone() } else { t.obs.clone() }),
            self.obs_width,
        )
    }

    fn joint_obs(&self, batch: &[&Transition]) -> Result<Tensor> {
        stack(
            batch.iter().map(|t| t.obs.concat()),
            self.agents * self.obs_width,
        )
    }

    /// One step for every estimator; mean loss over agents.
    pub fn update_estimators(&mut self, batch: &[&Transition]) -> Result<Option<f64>> {
        let coeffs = RegularizerCoeffs {
            alpha: self.cfg.alpha,
            beta: self.cfg.beta,
        };
        let per_agent: Vec<(Tensor, Vec<usize>, Vec<f64>)> = match self.estimators {
            Estimators::Dre(_) | Estimators::P2p(_) => (0..self.agents)
                .map(|i| {
                    Ok((
                        self.agent_obs(batch, i, false)?,
                        batch.iter().map(|t| t.actions[i]).collect(),
                        batch.iter().map(|t| t.rewards[i]).collect(),
                    ))
                })
                .collect::<Result<_>>()?,
            _ => Vec::new(),
        };
        let joint = match self.estimators {
            Estimators::Gre(_) => Some(JointBatch {
                joint_obs: self.joint_obs(batch)?,
                actions: batch.iter().map(|t| t.actions.clone()).collect(),
                rewards: batch.iter().map(|t| t.rewards.clone()).collect(),
            }),
            _ => None,
        };
        let adam = self.adam;
        match &mut self.estimators {
            Estimators::None => Ok(None),
            Estimators::Dre(ests) => {
                let mut total = 0.0;
                for (est, (obs, actions, rewards)) in ests.iter_mut().zip(per_agent) {
                    total += est.update(&EstimatorBatch::new(obs, actions, rewards)?, coeffs, &adam)?;
                }
                Ok(Some(total / ests.len() as f64))
            }
            Estimators::P2p(ests) => {
                let mut total = 0.0;
                for (est, (obs, actions, rewards)) in ests.iter_mut().zip(per_agent) {
                    total += est.update(&EstimatorBatch::new(obs, actions, rewards)?, &adam)?;
                }
                Ok(Some(total / ests.len() as f64))
            }
            Estimators::Gre(est) => {
                let batch = joint.expect("built for gre");
                Ok(Some(est.update(&batch, coeffs, &adam)?))
            }
        }
    }

    /// Estimated branch rewards: `batch x agents x K`, or `None` without an estimator.
    pub fn branch_rewards(&mut self, batch: &[&Transition]) -> Result<Option<Vec<Vec<Vec<f64>>>>> {
        let rows = batch.len();
        let mode = self.cfg.reward_mode;
        let mut out = vec![Vec::with_capacity(self.agents); rows];
        let beliefs_into = |out: &mut Vec<Vec<Vec<f64>>>, beliefs: Vec<RewardBeliefs>, rng: &mut ChaCha8Rng| {
            for (row, b) in out.iter_mut().zip(beliefs) {
                row.push(sample_or_mean(&b, mode, rng));
            }
        };
        match &self.estimators {
            Estimators::None => return Ok(None),
            Estimators::Dre(ests) => {
                for (i, est) in ests.iter().enumerate() {
                    let beliefs = est.estimate_batch(self.agent_obs(batch, i, false)?)?;
                    beliefs_into(&mut out, beliefs, &mut self.mode_rng);
                }
            }
            Estimators::P2p(ests) => {
                for (i, est) in ests.iter().enumerate() {
                    for (row, r) in out.iter_mut().zip(est.branch_estimates(&self.agent_obs(batch, i, false)?)?) {
                        row.push(r);
                    }
                }
            }
            Estimators::Gre(est) => {
                let actions: Vec<Vec<usize>> = batch.iter().map(|t| t.actions.clone()).collect();
                let beliefs = est.estimate_batch(&self.joint_obs(batch)?, &actions)?;
                for (row, per_agent) in out.iter_mut().zip(beliefs) {
                    for b in per_agent {
                        row.push(sample_or_mean(&b, mode, &mut self.mode_rng));
                    }
                }
            }
        }
        Ok(Some(out))
    }

    /// Mixed and lumped rewards of every sample and agent.
    pub fn shaped_rewards(&mut self, batch: &[&Transition]) -> Result<ShapedRewards> {
        let Some(estimates) = self.branch_rewards(batch)? else {
            let raw: Vec<Vec<f64>> = batch.iter().map(|t| t.rewards.clone()).collect();
            return Ok(ShapedRewards {
                mixed: raw.clone(),
                lumped: raw,
            });
        };
        let weights: Vec<Vec<Vec<f64>>> = (0..self.agents)
            .map(|i| self.actors[i].target_policy_batch(self.agent_obs(batch, i, false)?))
            .collect::<Result<_>>()?;
        let scheme = self.cfg.aggregation;
        let mut mixed = Vec::with_capacity(batch.len());
        let mut lumped = Vec::with_capacity(batch.len());
        for (b, (t, r_hat)) in batch.iter().zip(&estimates).enumerate() {
            let m: Vec<Vec<f64>> = (0..self.agents)
                .map(|i| build_up(&r_hat[i], t.actions[i], t.rewards[i]))
                .collect::<Result<_>>()?;
            let mut mrow = Vec::with_capacity(self.agents);
            let mut lrow = Vec::with_capacity(self.agents);
            for i in 0..self.agents {
                let w = PolicyWeights::new(weights[i][b].clone())?;
                let (g, l) = scheme.rewards(&m, i, &w, t.rewards[i])?;
                mrow.push(g);
                lrow.push(l);
            }
            mixed.push(mrow);
            lumped.push(lrow);
        }
        Ok(ShapedRewards { mixed, lumped })
    }

    /// `gamma * V_target(o')` for every sample and agent, flattened `b * agents + i`.
    pub fn bootstrap(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        let v = self.critic.target_values(self.nodes(batch, true)?, self.agents)?;
        Ok(v.into_iter().map(|x| self.cfg.gamma * x).collect())
    }

    /// Critic regression targets `R-bar + gamma * V_target(o')`, flattened.
    pub fn critic_targets(&mut self, batch: &[&Transition]) -> Result<Vec<f64>> {
        let shaped = self.shaped_rewards(batch)?;
        let boot = self.bootstrap(batch)?;
        Ok(shaped.mixed.concat().iter().zip(boot).map(|(r, b)| r + b).collect())
    }

    pub fn update_critic(&mut self, batch: &[&Transition]) -> Result<f64> {
        let targets = self.critic_targets(batch)?;
        let nodes = self.nodes(batch, false)?;
        self.critic.update(nodes, self.agents, &targets, &self.adam)
    }

    /// Advantages `r-bar + gamma * V_target(o') - V(o)`, indexed `[b][i]`.
    pub fn advantages(&mut self, batch: &[&Transition]) -> Result<Vec<Vec<f64>>> {
        let shaped = self.shaped_rewards(batch)?;
        let boot = self.bootstrap(batch)?;
        let v = self.critic.values(self.nodes(batch, false)?, self.agents)?;
        let n = self.agents;
        Ok(shaped
            .lumped
            .iter()
            .enumerate()
            .map(|(b, row)| (0..n).map(|i| row[i] + boot[b * n + i] - v[b * n + i]).collect())
            .collect())
    }

    /// One step per actor; mean objective over agents.
    pub fn update_actors(&mut self, batch: &[&Transition]) -> Result<f64> {
        let adv = self.advantages(batch)?;
        let mut total = 0.0;
        for i in 0..self.agents {
            let obs = self.agent_obs(batch, i, false)?;
            let actions = batch.iter().map(|t| t.actions[i]).collect();
            let a = adv.iter().map(|row| row[i]).collect();
            let ab = self.actors[i].batch(obs, actions, a)?;
            total += self.actors[i].update(&ab, self.cfg.clip_epsilon, self.cfg.entropy_scale, &self.adam)?;
        }
        Ok(total / self.agents as f64)
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        for a in &mut self.actors {
            a.soft_update(self.cfg.tau)?;
        }
        self.critic.soft_update(self.cfg.tau)
    }

    fn draw(&mut self) -> Result<Vec<Transition>> {
        Ok(self
            .buffer
            .sample(&mut self.batch_rng, self.cfg.batch_size)?
            .into_iter()
            .cloned()
            .collect())
    }

    /// One full update event.
    pub fn update(&mut self) -> Result<UpdateStats> {
        let b = self.draw()?;
        let estimator_loss = self.update_estimators(&b.iter().collect::<Vec<_>>())?;
        let b = self.draw()?;
        let critic_loss = self.update_critic(&b.iter().collect::<Vec<_>>())?;
        let b = self.draw()?;
        let actor_objective = self.update_actors(&b.iter().collect::<Vec<_>>())?;
        self.soft_update_targets()?;
        Ok(UpdateStats {
            estimator_loss,
            critic_loss,
            actor_objective,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut params = BTreeMap::new();
        for (i, a) in self.actors.iter().enumerate() {
            params.extend(a.params().export(&format!("actor{i}.")));
            params.extend(a.target().export(&format!("actor{i}_target.")));
        }
        params.extend(self.critic.params().export("critic."));
        params.extend(self.critic.target().export("critic_target."));
        match &self.estimators {
            Estimators::None => {}
            Estimators::Dre(e) => e
                .iter()
                .enumerate()
                .for_each(|(i, e)| params.extend(e.params().export(&format!("estimator{i}.")))),
            Estimators::P2p(e) => e
                .iter()
                .enumerate()
                .for_each(|(i, e)| params.extend(e.params().export(&format!("estimator{i}.")))),
            Estimators::Gre(e) => params.extend(e.params().export("estimator.")),
        }
        Checkpoint { params }
    }

    /// The whole run. `sink` sees every record as it is produced together
    /// with the wall time elapsed since the start.
    pub fn run(
        &mut self,
        mut sink: impl FnMut(&MetricRecord, Duration) -> Result<()>,
    ) -> Result<TrainOutcome> {
        let start = Instant::now();
        for _ in 0..self.cfg.update_interval {
            self.collect(ActionRule::Explore(0.0))?;
        }
        let mut running = Running::default();
        let mut records = Vec::new();
        let mut last = None;
        while self.episode < self.cfg.episodes {
            let explore = self.cfg.exploration(self.episode);
            self.collect(ActionRule::Explore(explore))?;
            self.episode += 1;
            let e = self.episode;
            if e % self.cfg.update_interval == 0 {
                let s = self.update()?;
                running.critic.push(s.critic_loss);
                running.actor.push(s.actor_objective);
                running.estimator.extend(s.estimator_loss);
            }
            if e % self.cfg.eval_interval == 0 || e == self.cfg.episodes {
                let eval = self.evaluate()?;
                let rec = MetricRecord {
                    episode: e,
                    eval_mean_reward: eval.mean,
                    eval_stderr: eval.stderr,
                    critic_loss: mean_of(&mut running.critic),
                    actor_objective: mean_of(&mut running.actor),
                    estimator_loss: mean_of(&mut running.estimator),
                };
                sink(&rec, start.elapsed())?;
                records.push(rec);
                last = Some(eval);
            }
            if e % self.cfg.refresh_interval == 0 {
                self.buffer.refresh(self.cfg.buffer_clear_rate)?;
            }
        }
        Ok(TrainOutcome {
            records,
            final_eval: last.expect("the final episode is always evaluated"),
            checkpoint: self.checkpoint(),
        })
    }
}

/// Trains `cfg` from scratch.
pub fn train(
    cfg: &RunConfig,
    sink: impl FnMut(&MetricRecord, Duration) -> Result<()>,
) -> Result<TrainOutcome> {
    Trainer::new(cfg.clone())?.run(sink)
}
