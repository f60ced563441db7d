//! Multi-head graph attention over the fully connected agent graph, followed
//! by an MLP that reads one state value per agent.
//!
//! Per head `h`: `z = x W_h`, logits `e_ij = leaky(a_src . z_i + a_dst . z_j)`,
//! weights `softmax_j(e_ij)` over every agent including `i`, head output
//! `sum_j w_ij z_j`. Head outputs are concatenated and fed to the MLP.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::mlp::{Mlp, MlpSpec, DEFAULT_HIDDEN, DEFAULT_SLOPE};
use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatSpec {
    pub input: usize,
    pub heads: usize,
    pub head_width: usize,
    pub hidden: Vec<usize>,
    pub slope: f64,
}

impl GatSpec {
    /// Eight heads of width eight and a 2x64 value MLP.
    pub fn new(input: usize) -> Self {
        Self {
            input,
            heads: 8,
            head_width: 8,
            hidden: vec![DEFAULT_HIDDEN, DEFAULT_HIDDEN],
            slope: DEFAULT_SLOPE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.head_width == 0 || self.input == 0 {
            return Err(Error::InvalidArgument(format!(
                "graph attention needs positive heads/width/input: {self:?}"
            )));
        }
        self.value_mlp_spec().validate()
    }

    fn value_mlp_spec(&self) -> MlpSpec {
        MlpSpec {
            input: self.heads * self.head_width,
            hidden: self.hidden.clone(),
            output: 1,
            slope: self.slope,
        }
    }
}

/// Output of one critic forward pass.
#[derive(Debug, Clone, Copy)]
pub struct GatOutput {
    /// `[batch * agents x 1]`.
    pub values: Var,
    /// `[batch * agents x agents]` attention weights of the first head.
    pub attention_first_head: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatCritic {
    spec: GatSpec,
    prefix: String,
    head_mlp: Mlp,
}

impl GatCritic {
    pub fn new(spec: GatSpec, prefix: impl Into<String>) -> Result<Self> {
        spec.validate()?;
        let prefix = prefix.into();
        let head_mlp = Mlp::new(spec.value_mlp_spec(), format!("{prefix}mlp."))?;
        Ok(Self {
            spec,
            prefix,
            head_mlp,
        })
    }

    pub fn spec(&self) -> &GatSpec {
        &self.spec
    }

    fn names(&self, head: usize) -> (String, String, String) {
        let p = &self.prefix;
        (
            format!("{p}head{head}.w"),
            format!("{p}head{head}.a_src"),
            format!("{p}head{head}.a_dst"),
        )
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) -> Result<()> {
        let (f, w) = (self.spec.input, self.spec.head_width);
        for h in 0..self.spec.heads {
            let (wn, src, dst) = self.names(h);
            store.insert_uniform(wn, &[f, w], 1.0 / (f as f64).sqrt(), rng)?;
            let bound = 1.0 / ((2 * w) as f64).sqrt();
            store.insert_uniform(src, &[w, 1], bound, rng)?;
            store.insert_uniform(dst, &[w, 1], bound, rng)?;
        }
        self.head_mlp.init(store, rng)
    }

    /// `nodes` is `[batch * agents x input]`, grouped agent-major within each
    /// batch element (row `b * agents + i`).
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        nodes: Var,
        agents: usize,
    ) -> Result<GatOutput> {
        let t = g.value(nodes);
        if t.cols() != self.spec.input || agents == 0 || t.rows() % agents != 0 {
            return Err(Error::shape(
                "gat_forward",
                format!(
                    "nodes {:?} for {agents} agents, input width {}",
                    t.shape(),
                    self.spec.input
                ),
            ));
        }
        let mut heads = Vec::with_capacity(self.spec.heads);
        let mut first = None;
        for h in 0..self.spec.heads {
            let (wn, src, dst) = self.names(h);
            let w = g.param(store, &wn)?;
            let a_src = g.param(store, &src)?;
            let a_dst = g.param(store, &dst)?;
            let z = g.matmul(nodes, w)?;
            let s = g.matmul(z, a_src)?;
            let d = g.matmul(z, a_dst)?;
            let logits = g.pair_sum(s, d, agents)?;
            let logits = g.leaky_relu(logits, self.spec.slope)?;
            let weights = g.softmax_rows(logits)?;
            first.get_or_insert(weights);
            heads.push(g.group_mix(weights, z, agents)?);
        }
        let joined = g.concat_cols(&heads)?;
        let values = self.head_mlp.forward(g, store, joined)?;
        Ok(GatOutput {
            values,
            attention_first_head: first.expect("at least one head"),
        })
    }

    /// Per-agent values for `nodes`, without keeping the tape.
    pub fn eval(&self, store: &ParamStore, nodes: Tensor, agents: usize) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let x = g.input(nodes)?;
        let out = self.forward(&mut g, store, x, agents)?;
        Ok(g.value(out.values).values().to_vec())
    }

    /// Attention weights of every head for `nodes`.
    pub fn attention(&self, store: &ParamStore, nodes: Tensor, agents: usize) -> Result<Vec<Tensor>> {
        let mut g = Graph::new();
        let x = g.input(nodes)?;
        let mut out = Vec::with_capacity(self.spec.heads);
        for h in 0..self.spec.heads {
            let (wn, src, dst) = self.names(h);
            let w = g.param(store, &wn)?;
            let a_src = g.param(store, &src)?;
            let a_dst = g.param(store, &dst)?;
            let z = g.matmul(x, w)?;
            let s = g.matmul(z, a_src)?;
            let d = g.matmul(z, a_dst)?;
            let logits = g.pair_sum(s, d, agents)?;
            let logits = g.leaky_relu(logits, self.spec.slope)?;
            let weights = g.softmax_rows(logits)?;
            out.push(g.value(weights).clone());
        }
        Ok(out)
    }
}
