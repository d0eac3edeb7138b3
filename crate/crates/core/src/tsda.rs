//! Replay buffer with time-symmetric data augmentation: each observed
//! transition can be stored together with its time-reversed conjugate.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::mdp::{conjugate_transition, Environment, Transition};
use crate::rng::RngStream;

/// Environment steps taken with uniform random actions before learning.
pub const WARMUP_ENV_STEPS: usize = 1000;

/// Replay capacity for a run. Augmentation stores two transitions per
/// environment step, so the capacity doubles with it.
pub fn capacity_for(total_env_steps: usize, tsda_enabled: bool) -> usize {
    if tsda_enabled {
        2 * total_env_steps
    } else {
        total_env_steps
    }
}

/// FIFO replay storage. Oldest entries are evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    tsda_enabled: bool,
    storage: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, tsda_enabled: bool) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::contract("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            tsda_enabled,
            storage: VecDeque::with_capacity(capacity.min(1 << 20)),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn tsda_enabled(&self) -> bool {
        self.tsda_enabled
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.storage.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }

    fn insert(&mut self, t: Transition) {
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(t);
    }

    /// Stores `t` and, with augmentation on, its conjugate right after it.
    pub fn push(&mut self, t: Transition, env: &dyn Environment) -> Result<()> {
        let twin = if self.tsda_enabled {
            Some(conjugate_transition(&t, env)?)
        } else {
            None
        };
        self.insert(t);
        if let Some(c) = twin {
            self.insert(c);
        }
        Ok(())
    }

    /// Uniform draw with replacement.
    pub fn sample(&self, batch_size: usize, rng: &mut RngStream) -> Result<Vec<&Transition>> {
        if self.storage.len() < batch_size || self.storage.is_empty() {
            return Err(Error::NotReady {
                size: self.storage.len(),
                requested: batch_size,
            });
        }
        Ok((0..batch_size)
            .map(|_| &self.storage[rng.index(self.storage.len())])
            .collect())
    }
}
