use alloc::collections::VecDeque;

use rand::Rng;

use crate::matrix::{BitMatrix, Pivot};

/// One environment step. States are embedded in the network frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub state: BitMatrix,
    pub action: Pivot,
    /// Minus the step cost.
    pub reward: i32,
    /// `None` once nothing nonzero is left.
    pub next_state: Option<BitMatrix>,
}

/// Bounded FIFO; the oldest transition leaves first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            items: VecDeque::with_capacity(capacity),
            capacity,
        }
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

    pub fn push(&mut self, t: Transition) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// `k` transitions drawn uniformly with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(
        &'a self,
        k: usize,
        rng: &'a mut R,
    ) -> impl Iterator<Item = &'a Transition> + 'a {
        (0..k).map(move |_| &self.items[rng.gen_range(0..self.items.len())])
    }
}
