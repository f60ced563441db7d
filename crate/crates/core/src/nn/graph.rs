//! Reverse-mode automatic differentiation over a recorded tape.
//!
//! Every operation appends a node holding its forward value; `backward` walks
//! the tape in reverse and accumulates vector-Jacobian products. Nodes are
//! only ever appended, so tape order is a valid topological order.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::params::ParamStore;
use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(String),
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    LeakyRelu(Var, f64),
    Softplus(Var),
    Clamp(Var, f64, f64),
    Minimum(Var, Var),
    Exp(Var),
    Ln(Var),
    Square(Var),
    SoftmaxRows(Var),
    SumAll(Var),
    MeanAll(Var),
    SumCols(Var),
    ColSlice(Var, usize),
    ConcatCols(Vec<Var>),
    Gather(Var, Vec<usize>),
    PairSum(Var, Var, usize),
    GroupMix(Var, Var, usize),
}

#[derive(Debug)]
struct Node {
    value: Arc<Tensor>,
    op: Op,
}

/// Gradients keyed by parameter name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    grads: BTreeMap<String, Tensor>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.grads.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.grads.iter()
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn insert(&mut self, name: impl Into<String>, grad: Tensor) {
        self.grads.insert(name.into(), grad);
    }
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let values = t.values().iter().map(|&v| f(v)).collect();
    Tensor::new(t.shape().to_vec(), values).expect("same shape")
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::new(a.shape().to_vec(), values).expect("same shape")
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Smallest distance from any leaky-relu, clamp or minimum input to its
    /// breakpoint, over the whole tape. Infinite when there are none.
    /// Exact ties in `minimum` are skipped: they come from two branches that
    /// agree identically (an unclipped ratio), not from a switch.
    /// Finite differences with step `h` are only meaningful when the loss
    /// stays on one linear piece, so gradient checks compare this against the
    /// perturbation size.
    pub fn kink_margin(&self) -> f64 {
        let min_abs = |it: &mut dyn Iterator<Item = f64>| it.map(f64::abs).fold(f64::INFINITY, f64::min);
        self.nodes
            .iter()
            .map(|n| match &n.op {
                Op::LeakyRelu(a, _) => min_abs(&mut self.value(*a).values().iter().copied()),
                Op::Clamp(a, lo, hi) => min_abs(
                    &mut self
                        .value(*a)
                        .values()
                        .iter()
                        .flat_map(|&x| [x - lo, x - hi]),
                ),
                Op::Minimum(a, b) => min_abs(
                    &mut self
                        .value(*a)
                        .values()
                        .iter()
                        .zip(self.value(*b).values())
                        .filter(|(x, y)| x != y)
                        .map(|(x, y)| x - y),
                ),
                _ => f64::INFINITY,
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn push(&mut self, value: Tensor, op: Op, what: &str) -> Result<Var> {
        value.ensure_finite(what)?;
        self.nodes.push(Node {
            value: Arc::new(value),
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Constant input; no gradient is reported for it.
    pub fn input(&mut self, t: Tensor) -> Result<Var> {
        self.push(t, Op::Input, "input")
    }

    /// Loads a named parameter from `store` as a differentiable leaf.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        let value = store
            .shared(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        self.nodes.push(Node {
            value,
            op: Op::Param(name.to_string()),
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}", ta.shape(), tb.shape()),
            ));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![0.0; m * n];
        gemm(ta.values(), m, k, false, tb.values(), k, n, false, &mut out, false);
        self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), "matmul")
    }

    /// `a [n x m] + b [1 x m]`, broadcasting `b` over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if tb.len() != ta.cols() {
            return Err(Error::shape(
                "add_row",
                format!("{:?} + {:?}", ta.shape(), tb.shape()),
            ));
        }
        let c = ta.cols();
        let bias = tb.values();
        let values = ta
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + bias[i % c])
            .collect();
        let out = Tensor::matrix(ta.rows(), c, values)?;
        self.push(out, Op::AddRow(a, b), "add_row")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("add", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), |x, y| x + y);
        self.push(out, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("sub", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), |x, y| x - y);
        self.push(out, Op::Sub(a, b), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("mul", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), |x, y| x * y);
        self.push(out, Op::Mul(a, b), "mul")
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("div", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), |x, y| x / y);
        self.push(out, Op::Div(a, b), "div")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = map(self.value(a), |x| x * c);
        self.push(out, Op::Scale(a, c), "scale")
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = map(self.value(a), |x| x + c);
        self.push(out, Op::AddScalar(a), "add_scalar")
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let out = map(self.value(a), |x| leaky_relu(x, slope));
        self.push(out, Op::LeakyRelu(a, slope), "leaky_relu")
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        let out = map(self.value(a), softplus);
        self.push(out, Op::Softplus(a), "softplus")
    }

    /// Elementwise clamp into `[lo, hi]`; gradient is zero outside the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        let out = map(self.value(a), |x| x.clamp(lo, hi));
        self.push(out, Op::Clamp(a, lo, hi), "clamp")
    }

    pub fn clamp_min(&mut self, a: Var, lo: f64) -> Result<Var> {
        self.clamp(a, lo, f64::INFINITY)
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("minimum", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), f64::min);
        self.push(out, Op::Minimum(a, b), "minimum")
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let out = map(self.value(a), f64::exp);
        self.push(out, Op::Exp(a), "exp")
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        let out = map(self.value(a), f64::ln);
        self.push(out, Op::Ln(a), "ln")
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        let out = map(self.value(a), |x| x * x);
        self.push(out, Op::Square(a), "square")
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let c = t.cols();
        let mut values = Vec::with_capacity(t.len());
        for r in 0..t.rows() {
            softmax_into(t.row_slice(r), &mut values);
        }
        let out = Tensor::matrix(t.rows(), c, values)?;
        self.push(out, Op::SoftmaxRows(a), "softmax")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).values().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a), "sum")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(Error::shape("mean", "empty tensor"));
        }
        let s = t.values().iter().sum::<f64>() / t.len() as f64;
        self.push(Tensor::scalar(s), Op::MeanAll(a), "mean")
    }

    /// Row sums: `[n x m] -> [n x 1]`.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let values = (0..t.rows()).map(|r| t.row_slice(r).iter().sum()).collect();
        let out = Tensor::matrix(t.rows(), 1, values)?;
        self.push(out, Op::SumCols(a), "sum_cols")
    }

    pub fn col_slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        let c = t.cols();
        if start + len > c {
            return Err(Error::shape(
                "col_slice",
                format!("columns {start}..{} of {c}", start + len),
            ));
        }
        let mut values = Vec::with_capacity(t.rows() * len);
        for r in 0..t.rows() {
            values.extend_from_slice(&t.row_slice(r)[start..start + len]);
        }
        let out = Tensor::matrix(t.rows(), len, values)?;
        self.push(out, Op::ColSlice(a, start), "col_slice")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|&p| self.value(p).rows())
            .ok_or_else(|| Error::shape("concat_cols", "no inputs"))?;
        if parts.iter().any(|&p| self.value(p).rows() != rows) {
            return Err(Error::shape("concat_cols", "row counts differ"));
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut values = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                values.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let out = Tensor::matrix(rows, total, values)?;
        self.push(out, Op::ConcatCols(parts.to_vec()), "concat_cols")
    }

    /// Picks `a[r, index[r]]` for each row: `[n x m] -> [n x 1]`.
    pub fn gather(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let t = self.value(a);
        if index.len() != t.rows() {
            return Err(Error::shape(
                "gather",
                format!("{} indices for {} rows", index.len(), t.rows()),
            ));
        }
        if let Some(&bad) = index.iter().find(|&&k| k >= t.cols()) {
            return Err(Error::shape(
                "gather",
                format!("index {bad} out of {} columns", t.cols()),
            ));
        }
        let values = index.iter().enumerate().map(|(r, &k)| t.get(r, k)).collect();
        let out = Tensor::matrix(t.rows(), 1, values)?;
        self.push(out, Op::Gather(a, index.to_vec()), "gather")
    }

    /// Pairwise sums within groups of `group` consecutive rows:
    /// `out[(g,i), j] = s[g*group + i] + t[g*group + j]`.
    pub fn pair_sum(&mut self, s: Var, t: Var, group: usize) -> Result<Var> {
        let (ts, tt) = (self.value(s), self.value(t));
        let n = ts.len();
        if group == 0 || n % group != 0 || tt.len() != n || ts.cols() != 1 || tt.cols() != 1 {
            return Err(Error::shape(
                "pair_sum",
                format!("{:?}, {:?}, group {group}", ts.shape(), tt.shape()),
            ));
        }
        let (sv, tv) = (ts.values(), tt.values());
        let mut values = Vec::with_capacity(n * group);
        for row in 0..n {
            let base = (row / group) * group;
            values.extend((0..group).map(|j| sv[row] + tv[base + j]));
        }
        let out = Tensor::matrix(n, group, values)?;
        self.push(out, Op::PairSum(s, t, group), "pair_sum")
    }

    /// Mixes rows within each group by a per-group weight matrix:
    /// `out[(g,i)] = sum_j w[(g,i), j] * z[g*group + j]`.
    pub fn group_mix(&mut self, weights: Var, z: Var, group: usize) -> Result<Var> {
        let (tw, tz) = (self.value(weights), self.value(z));
        let n = tz.rows();
        if group == 0 || n % group != 0 || tw.rows() != n || tw.cols() != group {
            return Err(Error::shape(
                "group_mix",
                format!("{:?}, {:?}, group {group}", tw.shape(), tz.shape()),
            ));
        }
        let d = tz.cols();
        let mut values = vec![0.0; n * d];
        for g in 0..n / group {
            let base = g * group;
            gemm(
                &tw.values()[base * group..(base + group) * group],
                group,
                group,
                false,
                &tz.values()[base * d..(base + group) * d],
                group,
                d,
                false,
                &mut values[base * d..(base + group) * d],
                false,
            );
        }
        let out = Tensor::matrix(n, d, values)?;
        self.push(out, Op::GroupMix(weights, z, group), "group_mix")
    }

    /// Reverse pass from a scalar `loss`. Returns gradients for every
    /// parameter leaf reachable from it.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got {:?}", self.value(loss).shape()),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            let y = &node.value;
            match &node.op {
                Op::Input => {}
                Op::Param(name) => {
                    let g = Tensor::new(y.shape().to_vec(), dy)?;
                    g.ensure_finite("gradient")?;
                    match out.grads.get_mut(name) {
                        Some(acc) => acc
                            .values_mut()
                            .iter_mut()
                            .zip(g.values())
                            .for_each(|(a, b)| *a += b),
                        None => {
                            out.grads.insert(name.clone(), g);
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                    let mut da = vec![0.0; m * k];
                    gemm(&dy, m, n, false, tb.values(), k, n, true, &mut da, false);
                    let mut db = vec![0.0; k * n];
                    gemm(ta.values(), m, k, true, &dy, m, n, false, &mut db, false);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddRow(a, b) => {
                    let c = y.cols();
                    let mut db = vec![0.0; c];
                    for (i, v) in dy.iter().enumerate() {
                        db[i % c] += v;
                    }
                    accumulate(&mut grads, *b, db);
                    accumulate(&mut grads, *a, dy);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, dy.clone());
                    accumulate(&mut grads, *a, dy);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, dy.iter().map(|v| -v).collect());
                    accumulate(&mut grads, *a, dy);
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a).values(), self.value(*b).values());
                    let da = dy.iter().zip(tb).map(|(d, y)| d * y).collect();
                    let db = dy.iter().zip(ta).map(|(d, x)| d * x).collect();
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Div(a, b) => {
                    let (ta, tb) = (self.value(*a).values(), self.value(*b).values());
                    let da = dy.iter().zip(tb).map(|(d, y)| d / y).collect();
                    let db = dy
                        .iter()
                        .zip(ta.iter().zip(tb))
                        .map(|(d, (x, y))| -d * x / (y * y))
                        .collect();
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads, *a, dy.iter().map(|v| v * c).collect());
                }
                Op::AddScalar(a) => accumulate(&mut grads, *a, dy),
                Op::LeakyRelu(a, slope) => {
                    let x = self.value(*a).values();
                    let da = dy
                        .iter()
                        .zip(x)
                        .map(|(d, &x)| if x >= 0.0 { *d } else { d * slope })
                        .collect();
                    accumulate(&mut grads, *a, da);
                }
                Op::Softplus(a) => {
                    let x = self.value(*a).values();
                    let da = dy.iter().zip(x).map(|(d, &x)| d * sigmoid(x)).collect();
                    accumulate(&mut grads, *a, da);
                }
                Op::Clamp(a, lo, hi) => {
                    let x = self.value(*a).values();
                    let da = dy
                        .iter()
                        .zip(x)
                        .map(|(d, &x)| if x >= *lo && x <= *hi { *d } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *a, da);
                }
                Op::Minimum(a, b) => {
                    let (ta, tb) = (self.value(*a).values(), self.value(*b).values());
                    let mut da = vec![0.0; dy.len()];
                    let mut db = vec![0.0; dy.len()];
                    for i in 0..dy.len() {
                        if ta[i] <= tb[i] {
                            da[i] = dy[i];
                        } else {
                            db[i] = dy[i];
                        }
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Exp(a) => {
                    let da = dy.iter().zip(y.values()).map(|(d, e)| d * e).collect();
                    accumulate(&mut grads, *a, da);
                }
                Op::Ln(a) => {
                    let x = self.value(*a).values();
                    let da = dy.iter().zip(x).map(|(d, x)| d / x).collect();
                    accumulate(&mut grads, *a, da);
                }
                Op::Square(a) => {
                    let x = self.value(*a).values();
                    let da = dy.iter().zip(x).map(|(d, x)| 2.0 * d * x).collect();
                    accumulate(&mut grads, *a, da);
                }
                Op::SoftmaxRows(a) => {
                    let c = y.cols();
                    let mut da = vec![0.0; dy.len()];
                    for r in 0..y.rows() {
                        let p = y.row_slice(r);
                        let d = &dy[r * c..(r + 1) * c];
                        let dot: f64 = p.iter().zip(d).map(|(p, d)| p * d).sum();
                        for j in 0..c {
                            da[r * c + j] = p[j] * (d[j] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::SumAll(a) => {
                    let n = self.value(*a).len();
                    accumulate(&mut grads, *a, vec![dy[0]; n]);
                }
                Op::MeanAll(a) => {
                    let n = self.value(*a).len();
                    accumulate(&mut grads, *a, vec![dy[0] / n as f64; n]);
                }
                Op::SumCols(a) => {
                    let c = self.value(*a).cols();
                    let da = dy.iter().flat_map(|&d| std::iter::repeat_n(d, c)).collect();
                    accumulate(&mut grads, *a, da);
                }
                Op::ColSlice(a, start) => {
                    let src = self.value(*a);
                    let (c, len) = (src.cols(), y.cols());
                    let mut da = vec![0.0; src.len()];
                    for r in 0..src.rows() {
                        da[r * c + start..r * c + start + len]
                            .copy_from_slice(&dy[r * len..(r + 1) * len]);
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::ConcatCols(parts) => {
                    let total = y.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let c = self.value(p).cols();
                        let mut dp = Vec::with_capacity(y.rows() * c);
                        for r in 0..y.rows() {
                            dp.extend_from_slice(&dy[r * total + offset..r * total + offset + c]);
                        }
                        accumulate(&mut grads, p, dp);
                        offset += c;
                    }
                }
                Op::Gather(a, index) => {
                    let c = self.value(*a).cols();
                    let mut da = vec![0.0; self.value(*a).len()];
                    for (r, &k) in index.iter().enumerate() {
                        da[r * c + k] = dy[r];
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::PairSum(s, t, group) => {
                    let n = self.value(*s).len();
                    let mut ds = vec![0.0; n];
                    let mut dt = vec![0.0; n];
                    for row in 0..n {
                        let base = (row / group) * group;
                        for j in 0..*group {
                            let d = dy[row * group + j];
                            ds[row] += d;
                            dt[base + j] += d;
                        }
                    }
                    accumulate(&mut grads, *s, ds);
                    accumulate(&mut grads, *t, dt);
                }
                Op::GroupMix(w, z, group) => {
                    let (tw, tz) = (self.value(*w), self.value(*z));
                    let (n, d, group) = (tz.rows(), tz.cols(), *group);
                    let mut dw = vec![0.0; tw.len()];
                    let mut dz = vec![0.0; tz.len()];
                    for g in 0..n / group {
                        let base = g * group;
                        let dy_g = &dy[base * d..(base + group) * d];
                        // dW = dY Z^T ; dZ = W^T dY
                        gemm(
                            dy_g,
                            group,
                            d,
                            false,
                            &tz.values()[base * d..(base + group) * d],
                            group,
                            d,
                            true,
                            &mut dw[base * group..(base + group) * group],
                            false,
                        );
                        gemm(
                            &tw.values()[base * group..(base + group) * group],
                            group,
                            group,
                            true,
                            dy_g,
                            group,
                            d,
                            false,
                            &mut dz[base * d..(base + group) * d],
                            false,
                        );
                    }
                    accumulate(&mut grads, *w, dw);
                    accumulate(&mut grads, *z, dz);
                }
            }
        }
        Ok(out)
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
    match &mut grads[v.0] {
        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g),
    }
}

/// `x` if `x >= 0`, else `slope * x`.
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

/// Numerically stable softmax of one row, appended to `out`.
pub fn softmax_into(row: &[f64], out: &mut Vec<f64>) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = out.len();
    let mut total = 0.0;
    for &v in row {
        let e = (v - max).exp();
        total += e;
        out.push(e);
    }
    out[start..].iter_mut().for_each(|v| *v /= total);
}
