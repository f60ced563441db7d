//! Numerical substrate: tensors, a reverse-mode tape, dense and graph-attention
//! networks, and Adam.

mod gat;
mod graph;
mod mlp;
mod params;
mod tensor;

pub use gat::{GatCritic, GatOutput, GatSpec};
pub use graph::{leaky_relu, softmax_into, Gradients, Graph, Var};
pub use mlp::{Mlp, MlpSpec, DEFAULT_HIDDEN, DEFAULT_SLOPE};
pub use params::{AdamConfig, ParamStore};
pub use tensor::Tensor;

/// Shannon entropy (nats) of a probability vector.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// Softmax of a single row.
pub fn softmax(row: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(row.len());
    softmax_into(row, &mut out);
    out
}
