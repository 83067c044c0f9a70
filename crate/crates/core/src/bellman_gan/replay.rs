use rand::Rng;
use serde::{Deserialize, Serialize};

/// One experience tuple, states and actions by index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: Vec<f64>,
    pub next_state: usize,
    /// Drawn from the behaviour policy when the transition was stored.
    pub next_action: usize,
    pub terminal: bool,
}

/// Bounded FIFO store of transitions with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayPool<T = Transition> {
    capacity: usize,
    items: Vec<T>,
    /// Slot overwritten by the next push once full.
    head: usize,
}

impl<T> ReplayPool<T> {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        ReplayPool {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
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

    pub fn push(&mut self, t: T) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// `n` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| rng.random_range(0..self.items.len())).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&T> {
        self.sample_indices(n, rng).into_iter().map(|i| &self.items[i]).collect()
    }

    pub fn get(&self, index: usize) -> Option<&T> {
        self.items.get(index)
    }

    /// Contents in storage order (not insertion order once wrapped).
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }
}
