//! Oracles shared by several test targets. Nothing here calls into the
//! library's own gradient or statistics helpers.
#![allow(dead_code)]

use dremarl::nn::{Graph, ParamStore, Tensor, Var};
use rand::Rng;

pub fn random_tensor<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let v = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::matrix(rows, cols, v).unwrap()
}

/// Worst relative error between tape gradients of `loss` and central
/// differences with step `h`, visiting every scalar of every parameter.
pub fn fd_max_rel_error<F>(store: &ParamStore, h: f64, loss: F) -> f64
where
    F: Fn(&mut Graph, &ParamStore) -> Var,
{
    fd_max_rel_error_floored(store, h, 1e-6, loss)
}

/// As [`fd_max_rel_error`], with `floor` as the smallest denominator.
pub fn fd_max_rel_error_floored<F>(store: &ParamStore, h: f64, floor: f64, loss: F) -> f64
where
    F: Fn(&mut Graph, &ParamStore) -> Var,
{
    let mut g = Graph::new();
    let l = loss(&mut g, store);
    let grads = g.backward(l).unwrap();
    let value_at = |s: &ParamStore| {
        let mut g = Graph::new();
        let l = loss(&mut g, s);
        g.value(l).item()
    };
    let mut probe = store.clone();
    let mut worst = 0.0f64;
    let names: Vec<String> = store.names().map(String::from).collect();
    for name in &names {
        let base = store.get(name).unwrap().clone();
        for j in 0..base.len() {
            let mut t = base.clone();
            t.values_mut()[j] = base.values()[j] + h;
            probe.set(name, t.clone()).unwrap();
            let up = value_at(&probe);
            t.values_mut()[j] = base.values()[j] - h;
            probe.set(name, t).unwrap();
            let down = value_at(&probe);
            probe.set(name, base.clone()).unwrap();
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(name).map_or(0.0, |g| g.values()[j]);
            let denom = analytic.abs().max(numeric.abs()).max(floor);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}

pub fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `x W + b` for row vector `x` and a row-major `[in x out]` weight.
pub fn affine(x: &[f64], w: &Tensor, b: &Tensor) -> Vec<f64> {
    let (fan_in, fan_out) = (w.shape()[0], w.shape()[1]);
    assert_eq!(x.len(), fan_in);
    (0..fan_out)
        .map(|j| b.values()[j] + (0..fan_in).map(|i| x[i] * w.values()[i * fan_out + j]).sum::<f64>())
        .collect()
}

/// Plain-loop MLP over parameters named `{prefix}l{i}.w` / `.b`.
pub fn mlp_forward(store: &ParamStore, prefix: &str, layers: usize, slope: f64, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for i in 0..layers {
        let w = store.get(&format!("{prefix}l{i}.w")).unwrap();
        let b = store.get(&format!("{prefix}l{i}.b")).unwrap();
        h = affine(&h, w, b);
        if i + 1 < layers {
            h.iter_mut().for_each(|v| *v = leaky(*v, slope));
        }
    }
    h
}
