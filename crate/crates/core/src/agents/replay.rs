use std::collections::VecDeque;

use rand::seq::index::sample;

use crate::seeds::SimRng;

/// One joint step. `actions` holds every agent's score vector back to back;
/// idle agents store zeros and `active = false`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub actions: Vec<f64>,
    pub active: Vec<bool>,
    pub rewards: Vec<f64>,
    pub next_state: Vec<f64>,
    pub next_active: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, items: VecDeque::with_capacity(capacity.min(1 << 16)) }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<&Transition> {
        self.items.get(k)
    }

    /// `m` distinct records drawn uniformly, or `None` if fewer are stored.
    pub fn sample(&self, m: usize, rng: &mut SimRng) -> Option<Vec<&Transition>> {
        if m == 0 || self.items.len() < m {
            return None;
        }
        Some(sample(rng, self.items.len(), m).iter().map(|k| &self.items[k]).collect())
    }
}
