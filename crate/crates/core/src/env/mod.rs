//! Simplified 2-D particle scenarios with discrete actions and fixed-length
//! episodes: cooperative navigation (`cn`), reference (`ref`) and treasure
//! collection (`trea`).

mod trajectory;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use trajectory::{read_trajectory, write_trajectory, TrajectoryStep};

pub const EPISODE_LENGTH: usize = 25;
/// no-op, +x, -x, +y, -y
pub const NUM_ACTIONS: usize = 5;
pub const DELIVERY_BONUS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physics {
    pub dt: f64,
    pub damping: f64,
    pub accel: f64,
    pub agent_radius: f64,
    pub landmark_radius: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            dt: 0.1,
            damping: 0.25,
            accel: 1.0,
            agent_radius: 0.1,
            landmark_radius: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Cn,
    Ref,
    Trea,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Cn, Scenario::Ref, Scenario::Trea];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Cn => "cn",
            Scenario::Ref => "ref",
            Scenario::Trea => "trea",
        }
    }

    /// Values of `q` this scenario supports.
    pub fn supported_counts(self) -> &'static [usize] {
        match self {
            Scenario::Cn => &[3, 7, 10],
            Scenario::Ref => &[2, 7, 10],
            Scenario::Trea => &[3, 7, 10],
        }
    }

    pub fn validate_count(self, q: usize) -> Result<()> {
        if self.supported_counts().contains(&q) {
            Ok(())
        } else {
            Err(Error::UnsupportedScenario(format!(
                "{}-{q} (supported q: {:?})",
                self.name(),
                self.supported_counts()
            )))
        }
    }

    /// Number of acting agents; treasure collection has `q` collectors and `q` banks.
    pub fn num_agents(self, q: usize) -> usize {
        match self {
            Scenario::Trea => 2 * q,
            _ => q,
        }
    }

    pub fn num_landmarks(self, q: usize) -> usize {
        match self {
            Scenario::Ref => q + 1,
            _ => q,
        }
    }

    /// Observation width, identical for every agent of a scenario.
    pub fn obs_width(self, q: usize) -> usize {
        let n = self.num_agents(q);
        let l = self.num_landmarks(q);
        let base = 4 + 2 * l + 2 * (n - 1);
        match self {
            Scenario::Cn => base,
            Scenario::Ref => base + l,
            Scenario::Trea => base + l + 3,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cn" => Ok(Scenario::Cn),
            "ref" => Ok(Scenario::Ref),
            "trea" => Ok(Scenario::Trea),
            other => Err(Error::UnsupportedScenario(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Body {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observations: Vec<Vec<f64>>,
    /// Individual deterministic rewards.
    pub rewards: Vec<f64>,
    /// Sum of `rewards`.
    pub team_reward: f64,
    pub done: bool,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn random_point(rng: &mut ChaCha8Rng) -> [f64; 2] {
    [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]
}

/// Complete simulator state. Cloning it forks the episode, RNG included.
#[derive(Debug, Clone)]
pub struct World {
    scenario: Scenario,
    q: usize,
    physics: Physics,
    agents: Vec<Body>,
    landmarks: Vec<[f64; 2]>,
    step: usize,
    /// Reference: goal landmark of each agent.
    goals: Vec<usize>,
    /// Treasure collection: treasure carried by each collector.
    holding: Vec<Option<usize>>,
    /// Treasure collection: treasure currently picked up and not yet delivered.
    collected: Vec<bool>,
    /// Deliveries credited to each agent on the most recent step.
    deliveries: Vec<u32>,
    rng: ChaCha8Rng,
}

impl World {
    /// Starts an episode: agents and landmarks uniform in `[-1, 1]^2`, zero velocities.
    pub fn reset(scenario: Scenario, q: usize, seed: u64) -> Result<(World, Vec<Vec<f64>>)> {
        scenario.validate_count(q)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = scenario.num_agents(q);
        let l = scenario.num_landmarks(q);
        let agents = (0..n)
            .map(|_| Body {
                pos: random_point(&mut rng),
                vel: [0.0; 2],
            })
            .collect();
        let landmarks = (0..l).map(|_| random_point(&mut rng)).collect();
        let goals = match scenario {
            Scenario::Ref => (0..n).map(|_| rng.random_range(0..l)).collect(),
            _ => Vec::new(),
        };
        let world = World {
            scenario,
            q,
            physics: Physics::default(),
            agents,
            landmarks,
            step: 0,
            goals,
            holding: vec![None; if scenario == Scenario::Trea { q } else { 0 }],
            collected: vec![false; if scenario == Scenario::Trea { l } else { 0 }],
            deliveries: vec![0; n],
            rng,
        };
        let obs = world.observations();
        Ok((world, obs))
    }

    /// Builds a state from explicit positions, bypassing the supported-count
    /// check. Velocities start at zero; reference goals default to landmark 0.
    pub fn from_layout(
        scenario: Scenario,
        q: usize,
        agent_positions: Vec<[f64; 2]>,
        landmarks: Vec<[f64; 2]>,
    ) -> Result<World> {
        if agent_positions.len() != scenario.num_agents(q) {
            return Err(Error::UnsupportedScenario(format!(
                "{} agents given for {}-{q}",
                agent_positions.len(),
                scenario.name()
            )));
        }
        if landmarks.len() != scenario.num_landmarks(q) && scenario != Scenario::Cn {
            return Err(Error::UnsupportedScenario(format!(
                "{} landmarks given for {}-{q}",
                landmarks.len(),
                scenario.name()
            )));
        }
        let n = agent_positions.len();
        let l = landmarks.len();
        Ok(World {
            scenario,
            q,
            physics: Physics::default(),
            agents: agent_positions
                .into_iter()
                .map(|pos| Body { pos, vel: [0.0; 2] })
                .collect(),
            landmarks,
            step: 0,
            goals: if scenario == Scenario::Ref { vec![0; n] } else { Vec::new() },
            holding: vec![None; if scenario == Scenario::Trea { q } else { 0 }],
            collected: vec![false; if scenario == Scenario::Trea { l } else { 0 }],
            deliveries: vec![0; n],
            rng: ChaCha8Rng::seed_from_u64(0),
        })
    }

    pub fn set_goals(&mut self, goals: Vec<usize>) -> Result<()> {
        if self.scenario != Scenario::Ref
            || goals.len() != self.agents.len()
            || goals.iter().any(|&g| g >= self.landmarks.len())
        {
            return Err(Error::InvalidArgument(format!("invalid goals {goals:?}")));
        }
        self.goals = goals;
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[Body] {
        &self.agents
    }

    pub fn landmarks(&self) -> &[[f64; 2]] {
        &self.landmarks
    }

    pub fn goals(&self) -> &[usize] {
        &self.goals
    }

    pub fn holding(&self) -> &[Option<usize>] {
        &self.holding
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= EPISODE_LENGTH
    }

    pub fn physics(&self) -> &Physics {
        &self.physics
    }

    /// Translates every agent and landmark by `offset`.
    pub fn translate(&mut self, offset: [f64; 2]) {
        for a in &mut self.agents {
            a.pos[0] += offset[0];
            a.pos[1] += offset[1];
        }
        for l in &mut self.landmarks {
            l[0] += offset[0];
            l[1] += offset[1];
        }
    }

    /// Reference scenario partner: agents are paired cyclically.
    pub fn partner(&self, i: usize) -> usize {
        (i + 1) % self.agents.len()
    }

    pub fn step(&mut self, joint_action: &[usize]) -> Result<StepResult> {
        if self.is_done() {
            return Err(Error::EpisodeFinished(self.step));
        }
        if joint_action.len() != self.agents.len() {
            return Err(Error::InvalidArgument(format!(
                "{} actions for {} agents",
                joint_action.len(),
                self.agents.len()
            )));
        }
        if let Some(&bad) = joint_action.iter().find(|&&k| k >= NUM_ACTIONS) {
            return Err(Error::ActionOutOfRange {
                index: bad,
                num_actions: NUM_ACTIONS,
            });
        }

        let p = self.physics;
        for (body, &k) in self.agents.iter_mut().zip(joint_action) {
            let acc = match k {
                1 => [p.accel, 0.0],
                2 => [-p.accel, 0.0],
                3 => [0.0, p.accel],
                4 => [0.0, -p.accel],
                _ => [0.0, 0.0],
            };
            for d in 0..2 {
                body.vel[d] = body.vel[d] * (1.0 - p.damping) + acc[d] * p.dt;
                body.pos[d] += body.vel[d] * p.dt;
            }
        }
        self.step += 1;
        self.deliveries.iter_mut().for_each(|d| *d = 0);
        if self.scenario == Scenario::Trea {
            self.resolve_treasure_events();
        }

        let rewards = self.scenario_reward();
        let team_reward = rewards.iter().sum();
        for r in &rewards {
            if !r.is_finite() {
                return Err(Error::NonFinite("scenario reward".into()));
            }
        }
        Ok(StepResult {
            observations: self.observations(),
            rewards,
            team_reward,
            done: self.is_done(),
        })
    }

    fn resolve_treasure_events(&mut self) {
        let q = self.q;
        let touch_bank = 2.0 * self.physics.agent_radius;
        let touch_treasure = self.physics.agent_radius + self.physics.landmark_radius;
        for c in 0..q {
            if let Some(t) = self.holding[c] {
                let bank = q + c;
                if dist(self.agents[c].pos, self.agents[bank].pos) < touch_bank {
                    self.deliveries[c] += 1;
                    self.deliveries[bank] += 1;
                    self.holding[c] = None;
                    self.collected[t] = false;
                    self.landmarks[t] = random_point(&mut self.rng);
                }
            }
        }
        for c in 0..q {
            if self.holding[c].is_some() {
                continue;
            }
            let pos = self.agents[c].pos;
            let hit = (0..self.landmarks.len())
                .filter(|&t| !self.collected[t])
                .map(|t| (t, dist(pos, self.landmarks[t])))
                .filter(|&(_, d)| d < touch_treasure)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((t, _)) = hit {
                self.holding[c] = Some(t);
                self.collected[t] = true;
            }
        }
    }

    /// Deterministic per-agent reward of the current state.
    pub fn scenario_reward(&self) -> Vec<f64> {
        match self.scenario {
            Scenario::Cn => self.navigation_reward(),
            Scenario::Ref => (0..self.agents.len())
                .map(|i| {
                    let j = self.partner(i);
                    -dist(self.agents[j].pos, self.landmarks[self.goals[j]])
                })
                .collect(),
            Scenario::Trea => self.treasure_reward(),
        }
    }

    fn navigation_reward(&self) -> Vec<f64> {
        let coverage: f64 = self
            .landmarks
            .iter()
            .map(|&l| {
                self.agents
                    .iter()
                    .map(|a| dist(a.pos, l))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        let touch = 2.0 * self.physics.agent_radius;
        (0..self.agents.len())
            .map(|i| {
                let collisions = (0..self.agents.len())
                    .filter(|&j| j != i && dist(self.agents[i].pos, self.agents[j].pos) < touch)
                    .count();
                -coverage - collisions as f64
            })
            .collect()
    }

    fn treasure_reward(&self) -> Vec<f64> {
        let q = self.q;
        (0..self.agents.len())
            .map(|i| {
                let shaping = if i < q {
                    let pos = self.agents[i].pos;
                    (0..self.landmarks.len())
                        .filter(|&t| !self.collected[t])
                        .map(|t| dist(pos, self.landmarks[t]))
                        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
                        .map_or(0.0, |d| -d)
                } else {
                    -dist(self.agents[i].pos, self.agents[i - q].pos)
                };
                shaping + DELIVERY_BONUS * f64::from(self.deliveries[i])
            })
            .collect()
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        (0..self.agents.len()).map(|i| self.observe(i)).collect()
    }

    fn observe(&self, i: usize) -> Vec<f64> {
        let me = self.agents[i];
        let mut o = Vec::with_capacity(self.scenario.obs_width(self.q));
        o.extend_from_slice(&me.vel);
        o.extend_from_slice(&me.pos);
        for l in &self.landmarks {
            o.push(l[0] - me.pos[0]);
            o.push(l[1] - me.pos[1]);
        }
        for (j, other) in self.agents.iter().enumerate() {
            if j != i {
                o.push(other.pos[0] - me.pos[0]);
                o.push(other.pos[1] - me.pos[1]);
            }
        }
        match self.scenario {
            Scenario::Cn => {}
            Scenario::Ref => {
                // The goal a partner would communicate, delivered directly.
                o.extend((0..self.landmarks.len()).map(|l| f64::from(u8::from(l == self.goals[i]))));
            }
            Scenario::Trea => {
                o.extend(self.collected.iter().map(|&c| f64::from(u8::from(!c))));
                let collector = i < self.q;
                let pair = if collector { i } else { i - self.q };
                o.push(f64::from(u8::from(collector)));
                o.push(f64::from(u8::from(!collector)));
                o.push(f64::from(u8::from(self.holding[pair].is_some())));
            }
        }
        o
    }

    pub fn snapshot(&self, actions: &[usize], result: &StepResult) -> TrajectoryStep {
        TrajectoryStep {
            step: self.step,
            positions: self.agents.iter().map(|a| a.pos).collect(),
            velocities: self.agents.iter().map(|a| a.vel).collect(),
            landmarks: self.landmarks.clone(),
            actions: actions.to_vec(),
            rewards: result.rewards.clone(),
            team_reward: result.team_reward,
        }
    }
}
