use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::obs::Features;
use crate::num::Scalar;

/// One joint step. `A` is the per-agent action type: kW for the actor-critic
/// learner, a level index for the discrete baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar, A: Serialize", deserialize = "F: Scalar, A: Deserialize<'de>"))]
pub struct Transition<F, A = F> {
    pub s: Features<F>,
    pub a: Vec<A>,
    pub r: Vec<F>,
    pub s_next: Features<F>,
    pub done: Vec<bool>,
}

/// Bounded FIFO replay memory with its own seeded sampler.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<T>,
    rng: ChaCha8Rng,
}

impl<T> ReplayBuffer<T> {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize, seed: u64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            rng: ChaCha8Rng::seed_from_u64(seed),
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

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, t: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// `k` entries drawn uniformly with replacement; empty when the buffer is.
    pub fn sample(&mut self, k: usize) -> Vec<&T> {
        if self.items.is_empty() {
            return Vec::new();
        }
        let n = self.items.len();
        let idx: Vec<usize> = (0..k).map(|_| self.rng.random_range(0..n)).collect();
        idx.into_iter().map(|i| &self.items[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evicts_oldest() {
        let mut b = ReplayBuffer::new(3, 0);
        for i in 0..5 {
            b.push(i);
        }
        assert_eq!(b.iter().copied().collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn sampling_is_seeded() {
        let fill = |seed| {
            let mut b = ReplayBuffer::new(10, seed);
            (0..10).for_each(|i| b.push(i));
            b.sample(20).into_iter().copied().collect::<Vec<_>>()
        };
        assert_eq!(fill(7), fill(7));
        assert_ne!(fill(7), fill(8));
        assert!(ReplayBuffer::<u8>::new(1, 0).sample(4).is_empty());
    }
}
