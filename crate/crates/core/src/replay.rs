//! Fixed-capacity FIFO replay of agent experience.
//!
//! Entries carry no reward: the discriminator moves between updates, so the
//! reward is recomputed for every sampled batch.

use alloc::vec::Vec;

use rand::Rng;

use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    /// Raw action sent to the environment.
    pub action: Vec<f64>,
    /// Squashed policy output that produced `action`, before decoding.
    pub emitted: Vec<f64>,
    pub next_state: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Experience>,
    cursor: usize,
}

/// A sampled minibatch laid out as row-major matrices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Batch {
    pub len: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub emitted: Vec<f64>,
    pub next_states: Vec<f64>,
    pub dones: Vec<bool>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer { capacity, items: Vec::new(), cursor: 0 })
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

    pub fn push(&mut self, e: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[self.cursor] = e;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Contents from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    pub fn sample_indices(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..n).map(|_| rng::index(rng, self.items.len())).collect())
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.items.get(i)
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Batch> {
        let idx = self.sample_indices(n, rng)?;
        let mut b = Batch { len: n, ..Batch::default() };
        for i in idx {
            let e = &self.items[i];
            b.states.extend_from_slice(&e.state);
            b.actions.extend_from_slice(&e.action);
            b.emitted.extend_from_slice(&e.emitted);
            b.next_states.extend_from_slice(&e.next_state);
            b.dones.push(e.done);
        }
        Ok(b)
    }
}
