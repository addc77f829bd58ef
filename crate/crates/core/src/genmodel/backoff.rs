//! Interpolated backoff counts shared by the planner and the refiner.
//!
//! For context keys `k_L, ..., k_1` (longest first) the smoothed
//! distribution is
//!
//! ```text
//! P(s) = w_L ML(s|k_L) + (1-w_L) [ w_{L-1} ML(s|k_{L-1}) + ... + (1-w_1) F(s) ]
//! ```
//!
//! where levels whose key was never observed pass their weight down, and
//! `F(s) = (c(s) + λ) / (N + λ|A|)` is the add-λ floor over the output
//! alphabet `A`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::sampling::{by_prob_desc, nucleus_pick, sample_next, DecoderConfig};
use super::{ModelError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smoothing {
    /// Add-λ constant of the floor distribution.
    pub lambda: f64,
    /// Weight on the maximum-likelihood estimate for a context key of
    /// length `i + 1`.
    pub weights: Vec<f64>,
}

impl Smoothing {
    pub fn uniform(levels: usize, weight: f64, lambda: f64) -> Self {
        Self {
            lambda,
            weights: vec![weight; levels],
        }
    }

    pub fn validate(&self, levels: usize) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ModelError::InvalidConfig("lambda must be >= 0".into()));
        }
        if self.weights.len() != levels {
            return Err(ModelError::InvalidConfig(format!(
                "expected {levels} interpolation weights, got {}",
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(ModelError::InvalidConfig(
                "interpolation weights must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Continuations {
    pub total: u64,
    /// Sorted by symbol.
    pub next: Vec<(u32, u64)>,
}

#[derive(Debug, Default)]
pub(crate) struct BackoffBuilder {
    contexts: HashMap<Vec<u32>, BTreeMap<u32, u64>>,
    floor: BTreeMap<u32, u64>,
}

impl BackoffBuilder {
    pub fn observe(&mut self, keys: &[&[u32]], symbol: u32) {
        for key in keys {
            let next = match self.contexts.get_mut(*key) {
                Some(n) => n,
                None => self.contexts.entry(key.to_vec()).or_default(),
            };
            *next.entry(symbol).or_default() += 1;
        }
        *self.floor.entry(symbol).or_default() += 1;
    }

    pub fn finish(self, smoothing: Smoothing) -> Result<BackoffModel> {
        let contexts = self
            .contexts
            .into_iter()
            .map(|(k, next)| {
                let total = next.values().sum();
                (k, Continuations { total, next: next.into_iter().collect() })
            })
            .collect();
        BackoffModel::from_parts(smoothing, contexts, self.floor.into_iter().collect())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BackoffModel {
    pub smoothing: Smoothing,
    contexts: HashMap<Vec<u32>, Continuations>,
    /// Output symbols, sorted.
    outputs: Vec<u32>,
    floor_counts: Vec<u64>,
    floor: Vec<f64>,
    /// Indices into `outputs`, by floor probability descending.
    floor_order: Vec<usize>,
}

impl PartialEq for BackoffModel {
    fn eq(&self, other: &Self) -> bool {
        self.smoothing == other.smoothing
            && self.contexts == other.contexts
            && self.outputs == other.outputs
            && self.floor_counts == other.floor_counts
    }
}

impl BackoffModel {
    pub fn from_parts(
        smoothing: Smoothing,
        contexts: HashMap<Vec<u32>, Continuations>,
        floor_counts: Vec<(u32, u64)>,
    ) -> Result<Self> {
        if floor_counts.is_empty() {
            return Err(ModelError::EmptyTraining);
        }
        let levels = smoothing.weights.len();
        if contexts.keys().any(|k| k.is_empty() || k.len() > levels) {
            return Err(ModelError::Corrupt("context key length out of range".into()));
        }
        let outputs: Vec<u32> = floor_counts.iter().map(|&(s, _)| s).collect();
        if outputs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::Corrupt("output symbols not sorted".into()));
        }
        let counts: Vec<u64> = floor_counts.iter().map(|&(_, c)| c).collect();
        let n: u64 = counts.iter().sum();
        let denom = n as f64 + smoothing.lambda * outputs.len() as f64;
        let floor: Vec<f64> = counts
            .iter()
            .map(|&c| (c as f64 + smoothing.lambda) / denom)
            .collect();
        let mut floor_order: Vec<usize> = (0..outputs.len()).collect();
        floor_order.sort_by(|&a, &b| {
            floor[b]
                .partial_cmp(&floor[a])
                .unwrap_or(Ordering::Equal)
                .then_with(|| outputs[a].cmp(&outputs[b]))
        });
        Ok(Self {
            smoothing,
            contexts,
            outputs,
            floor_counts: counts,
            floor,
            floor_order,
        })
    }

    pub fn outputs(&self) -> &[u32] {
        &self.outputs
    }

    pub fn is_output(&self, symbol: u32) -> bool {
        self.outputs.binary_search(&symbol).is_ok()
    }

    pub fn floor_counts(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.outputs.iter().copied().zip(self.floor_counts.iter().copied())
    }

    /// Contexts sorted by key.
    pub fn sorted_contexts(&self) -> Vec<(&Vec<u32>, &Continuations)> {
        let mut v: Vec<_> = self.contexts.iter().collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }

    /// Sparse maximum-likelihood part (sorted by symbol) and the weight left
    /// for the floor.
    fn mixture(&self, keys: &[&[u32]]) -> (Vec<(u32, f64)>, f64) {
        let mut sparse: Vec<(u32, f64)> = Vec::new();
        let mut rest = 1.0;
        for key in keys {
            let Some(c) = self.contexts.get(*key) else {
                continue;
            };
            let w = self.smoothing.weights[key.len() - 1];
            let scale = rest * w / c.total as f64;
            sparse.extend(c.next.iter().map(|&(s, n)| (s, scale * n as f64)));
            rest *= 1.0 - w;
        }
        sparse.sort_by_key(|&(s, _)| s);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(sparse.len());
        for (s, p) in sparse {
            match merged.last_mut() {
                Some((last, acc)) if *last == s => *acc += p,
                _ => merged.push((s, p)),
            }
        }
        (merged, rest)
    }

    fn floor_index(&self, symbol: u32) -> Option<usize> {
        self.outputs.binary_search(&symbol).ok()
    }

    /// Dense smoothed distribution over the output alphabet, by symbol.
    pub fn distribution(&self, keys: &[&[u32]]) -> Vec<(u32, f64)> {
        let (sparse, rest) = self.mixture(keys);
        let mut it = sparse.iter().peekable();
        self.outputs
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let ml = match it.peek() {
                    Some(&&(t, p)) if t == s => {
                        it.next();
                        p
                    }
                    _ => 0.0,
                };
                (s, ml + rest * self.floor[i])
            })
            .collect()
    }

    pub fn prob(&self, keys: &[&[u32]], symbol: u32) -> f64 {
        let Some(i) = self.floor_index(symbol) else {
            return 0.0;
        };
        let (sparse, rest) = self.mixture(keys);
        let ml = sparse
            .binary_search_by_key(&symbol, |&(s, _)| s)
            .map(|j| sparse[j].1)
            .unwrap_or(0.0);
        ml + rest * self.floor[i]
    }

    /// Draws the next symbol with nucleus sampling.
    ///
    /// At temperature 1 the sparse part is merged with the pre-sorted floor
    /// order instead of sorting the dense distribution.
    pub fn sample<R: RngCore + ?Sized>(
        &self,
        keys: &[&[u32]],
        cfg: &DecoderConfig,
        rng: &mut R,
    ) -> Result<u32> {
        if cfg.temperature != 1.0 {
            return sample_next(&self.distribution(keys), cfg, rng);
        }
        let (sparse, rest) = self.mixture(keys);
        let mut head: Vec<(u32, f64)> = sparse
            .iter()
            .map(|&(s, p)| {
                let i = self.floor_index(s).expect("ML symbols are outputs");
                (s, p + rest * self.floor[i])
            })
            .collect();
        head.sort_by(by_prob_desc);
        let tail = self
            .floor_order
            .iter()
            .map(|&i| (self.outputs[i], rest * self.floor[i]))
            .filter(|(s, _)| sparse.binary_search_by_key(s, |&(t, _)| t).is_err());
        let merged = MergeDesc {
            a: head.into_iter().peekable(),
            b: tail.peekable(),
        };
        nucleus_pick(merged, cfg.top_p, rng).ok_or(ModelError::EmptyDistribution)
    }
}

/// Merges two streams sorted by [`by_prob_desc`].
struct MergeDesc<A: Iterator, B: Iterator> {
    a: std::iter::Peekable<A>,
    b: std::iter::Peekable<B>,
}

impl<A, B> Iterator for MergeDesc<A, B>
where
    A: Iterator<Item = (u32, f64)>,
    B: Iterator<Item = (u32, f64)>,
{
    type Item = (u32, f64);

    fn next(&mut self) -> Option<(u32, f64)> {
        match (self.a.peek(), self.b.peek()) {
            (Some(x), Some(y)) => {
                if by_prob_desc(x, y) != Ordering::Greater {
                    self.a.next()
                } else {
                    self.b.next()
                }
            }
            (Some(_), None) => self.a.next(),
            (None, _) => self.b.next(),
        }
    }
}
