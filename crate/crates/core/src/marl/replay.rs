use rand::Rng;

use crate::error::{Error, Result};

/// One joint step of all agents. Per-agent vectors share one length.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTransition {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub reward: f64,
    pub next_obs: Vec<Vec<f64>>,
    pub state: Vec<f64>,
    pub next_state: Vec<f64>,
    /// True only when the episode ended because every engine arrived; a
    /// horizon cut-off still bootstraps.
    pub done: bool,
    pub active: Vec<bool>,
    pub next_active: Vec<bool>,
    pub next_masks: Vec<Vec<bool>>,
}

impl JointTransition {
    pub fn agent_count(&self) -> usize {
        self.actions.len()
    }

    pub fn is_consistent(&self) -> bool {
        let n = self.actions.len();
        self.obs.len() == n
            && self.next_obs.len() == n
            && self.active.len() == n
            && self.next_active.len() == n
            && self.next_masks.len() == n
    }
}

/// Fixed-capacity ring buffer with uniform sampling (with replacement).
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<JointTransition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity: capacity.max(1),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: JointTransition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> Option<&JointTransition> {
        self.items.get(i)
    }

    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if batch == 0 || self.items.len() < batch {
            return Err(Error::validation(format!(
                "cannot sample {batch} transitions from a buffer of {}",
                self.items.len()
            )));
        }
        Ok((0..batch).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&JointTransition>> {
        Ok(self
            .sample_indices(batch, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}
