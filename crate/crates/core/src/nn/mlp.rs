use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_SLOPE: f64 = 0.01;

/// Fully connected network with leaky-relu between layers and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub slope: f64,
}

impl MlpSpec {
    /// Two hidden layers of 64 units.
    pub fn new(input: usize, output: usize) -> Self {
        Self {
            input,
            hidden: vec![DEFAULT_HIDDEN, DEFAULT_HIDDEN],
            output,
            slope: DEFAULT_SLOPE,
        }
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.hidden = hidden;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.output == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidArgument(format!(
                "layer widths must be positive: {self:?}"
            )));
        }
        if !(self.slope > 0.0 && self.slope < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "leaky-relu slope {} outside (0, 1)",
                self.slope
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of each linear layer in order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input];
        widths.extend(&self.hidden);
        widths.push(self.output);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// An [`MlpSpec`] bound to a parameter-name prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    prefix: String,
}

impl Mlp {
    pub fn new(spec: MlpSpec, prefix: impl Into<String>) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            prefix: prefix.into(),
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn weight_name(&self, layer: usize) -> String {
        format!("{}l{layer}.w", self.prefix)
    }

    pub fn bias_name(&self, layer: usize) -> String {
        format!("{}l{layer}.b", self.prefix)
    }

    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) -> Result<()> {
        for (i, (fan_in, fan_out)) in self.spec.layer_dims().into_iter().enumerate() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            store.insert_uniform(self.weight_name(i), &[fan_in, fan_out], bound, rng)?;
            store.insert(self.bias_name(i), Tensor::zeros(&[1, fan_out]))?;
        }
        Ok(())
    }

    /// Records the forward pass of `input [batch x input]` on `g`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, input: Var) -> Result<Var> {
        let width = g.value(input).cols();
        if width != self.spec.input {
            return Err(Error::shape(
                "mlp_forward",
                format!("input width {width}, expected {}", self.spec.input),
            ));
        }
        let layers = self.spec.layer_dims().len();
        let mut x = input;
        for i in 0..layers {
            let w = g.param(store, &self.weight_name(i))?;
            let b = g.param(store, &self.bias_name(i))?;
            let z = g.matmul(x, w)?;
            x = g.add_row(z, b)?;
            if i + 1 < layers {
                x = g.leaky_relu(x, self.spec.slope)?;
            }
        }
        Ok(x)
    }

    /// Forward pass without keeping the tape.
    pub fn eval(&self, store: &ParamStore, input: Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let x = g.input(input)?;
        let y = self.forward(&mut g, store, x)?;
        Ok(g.value(y).clone())
    }
}
