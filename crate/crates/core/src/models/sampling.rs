//! Imbalance-aware sampling: training examples are drawn with replacement so
//! that both classes are equally likely in the emitted stream.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Per-example weights inverse to class frequency, summing to 1. Each class
/// receives half of the total mass.
pub fn inverse_frequency_weights(values: &[bool]) -> Result<Vec<f64>> {
    let positives = values.iter().filter(|v| **v).count();
    let negatives = values.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateTrainingSet(format!(
            "need both classes, got {positives} positive and {negatives} negative examples"
        )));
    }
    let wp = 0.5 / positives as f64;
    let wn = 0.5 / negatives as f64;
    Ok(values.iter().map(|&v| if v { wp } else { wn }).collect())
}

/// Infinite, seeded stream of example indices with balanced class frequency.
#[derive(Debug, Clone)]
pub struct BalancedSampler {
    weights: Vec<f64>,
    dist: WeightedIndex<f64>,
    rng: ChaCha8Rng,
}

impl BalancedSampler {
    pub fn new(values: &[bool], seed: u64) -> Result<Self> {
        let weights = inverse_frequency_weights(values)?;
        let dist = WeightedIndex::new(&weights).map_err(|e| Error::DegenerateTrainingSet(e.to_string()))?;
        Ok(BalancedSampler {
            weights,
            dist,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn draw(&mut self, n: usize) -> Vec<usize> {
        self.take(n).collect()
    }
}

impl Iterator for BalancedSampler {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        Some(self.dist.sample(&mut self.rng))
    }
}

/// Draws `n` balanced example indices.
pub fn balanced_sample(values: &[bool], n: usize, seed: u64) -> Result<Vec<usize>> {
    Ok(BalancedSampler::new(values, seed)?.draw(n))
}
