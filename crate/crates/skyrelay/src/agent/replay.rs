//! Bounded experience replay memory with uniform resampling.

use std::collections::VecDeque;

use rand::Rng;

/// One stored transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub features: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_features: Vec<f64>,
    /// Feasibility of each joint action in the successor state.
    pub next_mask: Vec<bool>,
    pub done: bool,
}

/// FIFO ring of experiences; inserting past capacity evicts the oldest.
#[derive(Debug, Clone, Default)]
pub struct ReplayMemory {
    buffer: VecDeque<Experience>,
    capacity: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            buffer: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn push(&mut self, experience: Experience) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(experience);
    }

    /// Uniform sample with replacement across the current contents.
    pub fn sample<R: Rng>(&self, batch_size: usize, rng: &mut R) -> Vec<&Experience> {
        (0..batch_size)
            .map(|_| &self.buffer[rng.gen_range(0..self.buffer.len())])
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.buffer.iter()
    }
}
