use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One joint step: everything needed to rebuild rewards and targets later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// `agents x obs_width`
    pub obs: Vec<Vec<f64>>,
    /// Behavior-policy distribution of each agent at `obs`.
    pub policies: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    /// Reward each agent observed (after perturbation and scope).
    pub rewards: Vec<f64>,
    pub next_obs: Vec<Vec<f64>>,
}

/// Bounded FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("buffer capacity must be positive".into()));
        }
        Ok(Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn extend(&mut self, ts: impl IntoIterator<Item = Transition>) {
        for t in ts {
            self.push(t);
        }
    }

    /// Drops the oldest `floor(fraction * len)` transitions; returns how many.
    pub fn refresh(&mut self, fraction: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidArgument(format!(
                "refresh fraction {fraction} outside [0, 1]"
            )));
        }
        let n = (fraction * self.items.len() as f64).floor() as usize;
        self.items.drain(..n);
        Ok(n)
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `n` uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<&Transition>> {
        if self.items.is_empty() {
            return Err(Error::InvalidArgument("sampling from an empty buffer".into()));
        }
        Ok((0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tagged(tag: f64) -> Transition {
        Transition {
            obs: vec![vec![tag]],
            policies: vec![vec![1.0]],
            actions: vec![0],
            rewards: vec![tag],
            next_obs: vec![vec![tag]],
        }
    }

    #[test]
    fn capacity_evicts_oldest() {
        let mut b = ReplayBuffer::new(3).unwrap();
        b.extend((0..5).map(|i| tagged(i as f64)));
        assert_eq!(b.len(), 3);
        let tags: Vec<f64> = b.iter().map(|t| t.rewards[0]).collect();
        assert_eq!(tags, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn refresh_drops_oldest_fraction() {
        let mut b = ReplayBuffer::new(100).unwrap();
        b.extend((0..10).map(|i| tagged(i as f64)));
        assert_eq!(b.refresh(0.4).unwrap(), 4);
        assert_eq!(b.iter().next().unwrap().rewards[0], 4.0);
        assert!(b.refresh(1.5).is_err());
    }

    #[test]
    fn sampling() {
        let mut b = ReplayBuffer::new(10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(b.sample(&mut rng, 1).is_err());
        b.push(tagged(1.0));
        b.push(tagged(2.0));
        assert_eq!(b.sample(&mut rng, 7).unwrap().len(), 7);
    }
}
