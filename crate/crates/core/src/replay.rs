//! Proportional prioritized experience replay on a sum tree.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Pauli, Syndrome};
use crate::perspectives::Perspective;

pub const PRIORITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("buffer holds {have} transitions, {want} requested")]
    BufferTooSmall { have: usize, want: usize },
    #[error("index {index} out of range for buffer of size {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("index and priority lists differ in length")]
    LengthMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub perspective: Perspective,
    pub action: Pauli,
    pub reward: f64,
    pub next_syndrome: Syndrome,
    pub terminal: bool,
}

impl Transition {
    pub fn new(perspective: Perspective, action: Pauli, reward: f64, next_syndrome: Syndrome) -> Self {
        let terminal = next_syndrome.is_empty();
        Self { perspective, action, reward, next_syndrome, terminal }
    }
}

/// Binary tree whose internal nodes hold the sums of their children.
#[derive(Debug, Clone)]
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(capacity: usize) -> Self {
        let leaves = capacity.next_power_of_two();
        Self { leaves, nodes: vec![0.0; 2 * leaves] }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    fn set(&mut self, i: usize, value: f64) {
        let mut k = self.leaves + i;
        self.nodes[k] = value;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf whose cumulative interval contains `mass`, restricted to leaves
    /// with positive value.
    fn find(&self, mut mass: f64, len: usize) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            if mass < left || self.nodes[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                mass -= left;
                k = 2 * k + 1;
            }
        }
        (k - self.leaves).min(len - 1)
    }
}

/// A sampled minibatch: buffer indices, normalized importance weights and the
/// stored items.
#[derive(Debug)]
pub struct Batch<'a, T> {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub items: Vec<&'a T>,
}

#[derive(Debug, Clone)]
pub struct PrioritizedBuffer<T> {
    capacity: usize,
    alpha: f64,
    beta: f64,
    items: Vec<T>,
    priorities: Vec<f64>,
    next: usize,
    max_priority: f64,
    tree: SumTree,
}

impl<T> PrioritizedBuffer<T> {
    pub fn new(capacity: usize, alpha: f64, beta: f64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            alpha,
            beta,
            items: Vec::with_capacity(capacity),
            priorities: Vec::with_capacity(capacity),
            next: 0,
            max_priority: 1.0,
            tree: SumTree::new(capacity),
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

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn get(&self, index: usize) -> Option<&T> {
        self.items.get(index)
    }

    pub fn priority(&self, index: usize) -> Option<f64> {
        self.priorities.get(index).copied()
    }

    /// Largest priority ever assigned; new entries receive it.
    pub fn max_priority(&self) -> f64 {
        self.max_priority
    }

    /// `P_j = p_j^α / Σ_k p_k^α`.
    pub fn probability(&self, index: usize) -> Option<f64> {
        (index < self.len()).then(|| self.tree.get(index) / self.tree.total())
    }

    fn scaled(&self, p: f64) -> f64 {
        p.powf(self.alpha)
    }

    /// Inserts at the current maximum priority, overwriting the oldest entry
    /// once full. Returns the slot used.
    pub fn push(&mut self, item: T) -> usize {
        let slot = self.next;
        let p = self.max_priority;
        if self.items.len() < self.capacity {
            self.items.push(item);
            self.priorities.push(p);
        } else {
            self.items[slot] = item;
            self.priorities[slot] = p;
        }
        self.tree.set(slot, self.scaled(p));
        self.next = (slot + 1) % self.capacity;
        slot
    }

    /// `n` indices drawn with replacement with probability `P_j`, weights
    /// `(M·P_j)^-β` divided by the batch maximum.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch<'_, T>, ReplayError> {
        let m = self.len();
        if m < n || m == 0 {
            return Err(ReplayError::BufferTooSmall { have: m, want: n });
        }
        let total = self.tree.total();
        let indices: Vec<usize> = (0..n).map(|_| self.tree.find(rng.gen::<f64>() * total, m)).collect();
        let mut weights: Vec<f64> = indices
            .iter()
            .map(|&j| (m as f64 * self.tree.get(j) / total).powf(-self.beta))
            .collect();
        let max = weights.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            for w in &mut weights {
                *w /= max;
            }
        }
        let items = indices.iter().map(|&j| &self.items[j]).collect();
        Ok(Batch { indices, weights, items })
    }

    /// Sets priorities to `|δ| + floor`.
    pub fn update_priorities(&mut self, indices: &[usize], deltas: &[f64]) -> Result<(), ReplayError> {
        if indices.len() != deltas.len() {
            return Err(ReplayError::LengthMismatch);
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(ReplayError::IndexOutOfRange { index: bad, len: self.len() });
        }
        for (&i, &delta) in indices.iter().zip(deltas) {
            let p = delta.abs() + PRIORITY_FLOOR;
            self.priorities[i] = p;
            self.max_priority = self.max_priority.max(p);
            self.tree.set(i, self.scaled(p));
        }
        Ok(())
    }

    #[cfg(test)]
    fn tree_is_consistent(&self) -> bool {
        let leaves = self.tree.leaves;
        let leaf_ok = (0..leaves).all(|i| {
            let want = self.priorities.get(i).map_or(0.0, |&p| self.scaled(p));
            self.tree.get(i) == want
        });
        let sums_ok = (1..leaves).all(|k| {
            let s = self.tree.nodes[2 * k] + self.tree.nodes[2 * k + 1];
            (self.tree.nodes[k] - s).abs() <= 1e-9 * s.max(1.0)
        });
        let total: f64 = self.priorities.iter().map(|&p| self.scaled(p)).sum();
        leaf_ok && sums_ok && (self.tree.total() - total).abs() <= 1e-9 * total.max(1.0)
    }
}
