use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{softmax, AdamConfig, GatCritic, GatSpec, Graph, Mlp, MlpSpec, ParamStore, Tensor, Var};

/// Probabilities below this are floored before division and logarithms.
pub const PROB_FLOOR: f64 = 1e-8;

/// `min(u * adv, clip(u, 1 - eps, 1 + eps) * adv)`.
pub fn clipped_surrogate(u: f64, adv: f64, eps: f64) -> f64 {
    (u * adv).min(u.clamp(1.0 - eps, 1.0 + eps) * adv)
}

/// Inputs of one actor step.
#[derive(Debug, Clone)]
pub struct ActorBatch {
    /// `[batch x obs_width]`
    pub obs: Tensor,
    pub actions: Vec<usize>,
    pub advantages: Vec<f64>,
    /// `pi_target(a | o)` for each row; the ratio denominator.
    pub old_probs: Vec<f64>,
}

/// Decentralized policy with its target copy.
#[derive(Debug, Clone)]
pub struct Actor {
    mlp: Mlp,
    params: ParamStore,
    target: ParamStore,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(
        obs_width: usize,
        num_actions: usize,
        hidden: Vec<usize>,
        slope: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mlp = Mlp::new(
            MlpSpec {
                input: obs_width,
                hidden,
                output: num_actions,
                slope,
            },
            "",
        )?;
        let mut params = ParamStore::new();
        mlp.init(&mut params, rng)?;
        let target = params.clone();
        Ok(Self { mlp, params, target })
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

    pub fn target(&self) -> &ParamStore {
        &self.target
    }

    pub fn target_mut(&mut self) -> &mut ParamStore {
        &mut self.target
    }

    fn probs(&self, store: &ParamStore, obs: Tensor) -> Result<Vec<Vec<f64>>> {
        let logits = self.mlp.eval(store, obs)?;
        Ok((0..logits.rows()).map(|r| softmax(logits.row_slice(r))).collect())
    }

    pub fn policy(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.probs(&self.params, Tensor::row(obs.to_vec()))?.remove(0))
    }

    pub fn policy_batch(&self, obs: Tensor) -> Result<Vec<Vec<f64>>> {
        self.probs(&self.params, obs)
    }

    pub fn target_policy_batch(&self, obs: Tensor) -> Result<Vec<Vec<f64>>> {
        self.probs(&self.target, obs)
    }

    /// Fills in `old_probs` from the target policy.
    pub fn batch(&self, obs: Tensor, actions: Vec<usize>, advantages: Vec<f64>) -> Result<ActorBatch> {
        let target = self.target_policy_batch(obs.clone())?;
        let old_probs = target
            .iter()
            .zip(&actions)
            .map(|(p, &a)| {
                p.get(a).copied().ok_or(Error::ActionOutOfRange {
                    index: a,
                    num_actions: p.len(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(ActorBatch {
            obs,
            actions,
            advantages,
            old_probs,
        })
    }

    /// Mean clipped surrogate plus `eta` times the policy entropy.
    pub fn objective(&self, g: &mut Graph, batch: &ActorBatch, eps: f64, eta: f64) -> Result<Var> {
        let rows = batch.obs.rows();
        if batch.actions.len() != rows || batch.advantages.len() != rows || batch.old_probs.len() != rows {
            return Err(Error::shape("actor batch", "row counts differ"));
        }
        let x = g.input(batch.obs.clone())?;
        let logits = self.mlp.forward(g, &self.params, x)?;
        let pi = g.softmax_rows(logits)?;
        let pi_a = g.gather(pi, &batch.actions)?;
        let pi_a = g.clamp_min(pi_a, PROB_FLOOR)?;
        let old: Vec<f64> = batch.old_probs.iter().map(|p| p.max(PROB_FLOOR)).collect();
        let old = g.input(Tensor::matrix(rows, 1, old)?)?;
        let u = g.div(pi_a, old)?;
        let adv = g.input(Tensor::matrix(rows, 1, batch.advantages.clone())?)?;
        let plain = g.mul(u, adv)?;
        let clipped = g.clamp(u, 1.0 - eps, 1.0 + eps)?;
        let clipped = g.mul(clipped, adv)?;
        let surrogate = g.minimum(plain, clipped)?;

        let floored = g.clamp_min(pi, PROB_FLOOR)?;
        let log_pi = g.ln(floored)?;
        let plogp = g.mul(pi, log_pi)?;
        let neg_entropy = g.sum_cols(plogp)?;
        let bonus = g.scale(neg_entropy, -eta)?;
        let per_row = g.add(surrogate, bonus)?;
        g.mean(per_row)
    }

    /// One Adam ascent step; returns the objective before the step.
    pub fn update(&mut self, batch: &ActorBatch, eps: f64, eta: f64, adam: &AdamConfig) -> Result<f64> {
        let mut g = Graph::new();
        let obj = self.objective(&mut g, batch, eps, eta)?;
        let value = g.value(obj).item();
        let loss = g.scale(obj, -1.0)?;
        let grads = g.backward(loss)?;
        self.params.adam_step(&grads, adam)?;
        Ok(value)
    }

    pub fn soft_update(&mut self, tau: f64) -> Result<()> {
        self.target.soft_update_from(&self.params, tau)
    }
}

/// Centralized graph-attention critic with its target copy.
#[derive(Debug, Clone)]
pub struct Critic {
    gat: GatCritic,
    params: ParamStore,
    target: ParamStore,
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(spec: GatSpec, rng: &mut R) -> Result<Self> {
        let gat = GatCritic::new(spec, "")?;
        let mut params = ParamStore::new();
        gat.init(&mut params, rng)?;
        let target = params.clone();
        Ok(Self { gat, params, target })
    }

    pub fn gat(&self) -> &GatCritic {
        &self.gat
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn target(&self) -> &ParamStore {
        &self.target
    }

    pub fn target_mut(&mut self) -> &mut ParamStore {
        &mut self.target
    }

    /// `V_psi` for every node row.
    pub fn values(&self, nodes: Tensor, agents: usize) -> Result<Vec<f64>> {
        self.gat.eval(&self.params, nodes, agents)
    }

    /// `V_psi~` for every node row.
    pub fn target_values(&self, nodes: Tensor, agents: usize) -> Result<Vec<f64>> {
        self.gat.eval(&self.target, nodes, agents)
    }

    /// Mean squared difference between `V_psi(nodes)` and fixed `targets`.
    pub fn loss(&self, g: &mut Graph, nodes: Tensor, agents: usize, targets: &[f64]) -> Result<Var> {
        let rows = nodes.rows();
        if targets.len() != rows {
            return Err(Error::shape(
                "critic loss",
                format!("{} targets for {rows} nodes", targets.len()),
            ));
        }
        let x = g.input(nodes)?;
        let out = self.gat.forward(g, &self.params, x, agents)?;
        let y = g.input(Tensor::matrix(rows, 1, targets.to_vec())?)?;
        let diff = g.sub(out.values, y)?;
        let sq = g.square(diff)?;
        g.mean(sq)
    }

    /// One Adam step; returns the loss before the step.
    pub fn update(&mut self, nodes: Tensor, agents: usize, targets: &[f64], adam: &AdamConfig) -> Result<f64> {
        let mut g = Graph::new();
        let loss = self.loss(&mut g, nodes, agents, targets)?;
        let value = g.value(loss).item();
        let grads = g.backward(loss)?;
        self.params.adam_step(&grads, adam)?;
        Ok(value)
    }

    pub fn soft_update(&mut self, tau: f64) -> Result<()> {
        self.target.soft_update_from(&self.params, tau)
    }
}
