use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::Gradients;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
struct Slot {
    value: Arc<Tensor>,
    m: Tensor,
    v: Tensor,
}

/// Named parameters with their Adam moment estimates.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    slots: BTreeMap<String, Slot>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        value.ensure_finite("parameter init")?;
        let m = Tensor::zeros(value.shape());
        let v = Tensor::zeros(value.shape());
        self.slots.insert(
            name.into(),
            Slot {
                value: Arc::new(value),
                m,
                v,
            },
        );
        Ok(())
    }

    /// Inserts a tensor with entries uniform in `[-bound, bound]`.
    pub fn insert_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        bound: f64,
        rng: &mut R,
    ) -> Result<()> {
        let n: usize = shape.iter().product();
        let values = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
        self.insert(name, Tensor::new(shape.to_vec(), values)?)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.slots.get(name).map(|s| s.value.as_ref())
    }

    pub(crate) fn shared(&self, name: &str) -> Option<Arc<Tensor>> {
        self.slots.get(name).map(|s| Arc::clone(&s.value))
    }

    /// Replaces a parameter value, keeping its moments. Shapes must agree.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let slot = self
            .slots
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        if slot.value.shape() != value.shape() {
            return Err(Error::shape(
                "ParamStore::set",
                format!("{name}: {:?} vs {:?}", slot.value.shape(), value.shape()),
            ));
        }
        value.ensure_finite("parameter set")?;
        slot.value = Arc::new(value);
        Ok(())
    }

    pub fn moments(&self, name: &str) -> Option<(&Tensor, &Tensor)> {
        self.slots.get(name).map(|s| (&s.m, &s.v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.slots.iter().map(|(k, s)| (k.as_str(), s.value.as_ref()))
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn num_scalars(&self) -> usize {
        self.slots.values().map(|s| s.value.len()).sum()
    }

    /// One bias-corrected Adam step (descent) using `grads`. Parameters that
    /// have no gradient entry are left untouched. Nothing is written if any
    /// updated value would be non-finite.
    pub fn adam_step(&mut self, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
        for (name, g) in grads.iter() {
            let slot = self
                .slots
                .get(name)
                .ok_or_else(|| Error::UnknownParameter(name.clone()))?;
            if slot.value.shape() != g.shape() {
                return Err(Error::shape(
                    "adam_step",
                    format!("{name}: param {:?}, grad {:?}", slot.value.shape(), g.shape()),
                ));
            }
        }

        let t = (self.step + 1) as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let mut staged = Vec::with_capacity(grads.len());
        for (name, g) in grads.iter() {
            let slot = &self.slots[name];
            let mut value = slot.value.as_ref().clone();
            let mut m = slot.m.clone();
            let mut v = slot.v.clone();
            for (((p, m), v), &g) in value
                .values_mut()
                .iter_mut()
                .zip(m.values_mut())
                .zip(v.values_mut())
                .zip(g.values())
            {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
            value.ensure_finite("adam update")?;
            staged.push((name.clone(), value, m, v));
        }
        for (name, value, m, v) in staged {
            let slot = self.slots.get_mut(&name).expect("validated above");
            slot.value = Arc::new(value);
            slot.m = m;
            slot.v = v;
        }
        self.step += 1;
        Ok(())
    }

    /// `self <- tau * source + (1 - tau) * self` for every parameter.
    pub fn soft_update_from(&mut self, source: &ParamStore, tau: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidArgument(format!("tau {tau} outside [0, 1]")));
        }
        if self.slots.len() != source.slots.len() {
            return Err(Error::shape(
                "soft_update",
                format!("{} vs {} parameters", self.slots.len(), source.slots.len()),
            ));
        }
        for (name, slot) in &self.slots {
            let src = source
                .slots
                .get(name)
                .ok_or_else(|| Error::UnknownParameter(name.clone()))?;
            if src.value.shape() != slot.value.shape() {
                return Err(Error::shape(
                    "soft_update",
                    format!("{name}: {:?} vs {:?}", src.value.shape(), slot.value.shape()),
                ));
            }
        }
        for (name, slot) in self.slots.iter_mut() {
            let src = &source.slots[name].value;
            let mut value = slot.value.as_ref().clone();
            for (t, s) in value.values_mut().iter_mut().zip(src.values()) {
                *t = tau * s + (1.0 - tau) * *t;
            }
            slot.value = Arc::new(value);
        }
        Ok(())
    }

    /// Parameter values keyed by `prefix` + name, for checkpoints.
    pub fn export(&self, prefix: &str) -> BTreeMap<String, Tensor> {
        self.slots
            .iter()
            .map(|(k, s)| (format!("{prefix}{k}"), s.value.as_ref().clone()))
            .collect()
    }
}
