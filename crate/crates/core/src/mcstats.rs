//! Streaming Monte Carlo estimators with a deterministic parallel reduction.
//!
//! Estimators use the Welford single-pass update; parallel estimation splits
//! the draw range into fixed-size blocks and merges them in a pairwise tree
//! over block index, so results are bit-identical for any worker count.

use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Draws per reduction block. Fixed so that worker scheduling cannot change
/// the reduction tree.
const BLOCK: u64 = 1024;

/// Welford mean/variance accumulator for scalar samples.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Estimator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Estimator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Single-pass update. Non-finite values abort the estimate rather than
    /// silently biasing it.
    pub fn accumulate(&mut self, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("sample value {value}")));
        }
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
        Ok(())
    }

    /// Parallel-merge of two accumulators; equals sequential accumulation
    /// over the concatenated stream up to floating-point rounding.
    pub fn merge(a: &Estimator, b: &Estimator) -> Estimator {
        if a.count == 0 {
            return b.clone();
        }
        if b.count == 0 {
            return a.clone();
        }
        let count = a.count + b.count;
        let delta = b.mean - a.mean;
        let nb = b.count as f64;
        let na = a.count as f64;
        let n = count as f64;
        Estimator {
            count,
            mean: a.mean + delta * nb / n,
            m2: a.m2 + b.m2 + delta * delta * na * nb / n,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero until two samples have arrived.
    pub fn variance(&self) -> f64 {
        if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    /// Standard error of the mean; `None` while it is undefined (count < 2).
    pub fn standard_error(&self) -> Option<f64> {
        if self.count > 1 {
            Some((self.m2 / (self.count as f64 * (self.count - 1) as f64)).sqrt())
        } else {
            None
        }
    }
}

/// Component-wise Welford accumulator for fixed-length vector samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorEstimator {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl VectorEstimator {
    pub fn new(len: usize) -> Self {
        VectorEstimator {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn accumulate(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sample value {bad}")));
        }
        self.count += 1;
        let n = self.count as f64;
        for (i, &v) in values.iter().enumerate() {
            let delta = v - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (v - self.mean[i]);
        }
        Ok(())
    }

    pub fn merge(a: &VectorEstimator, b: &VectorEstimator) -> VectorEstimator {
        if a.count == 0 {
            return b.clone();
        }
        if b.count == 0 {
            return a.clone();
        }
        assert_eq!(a.mean.len(), b.mean.len(), "estimator shape mismatch");
        let count = a.count + b.count;
        let na = a.count as f64;
        let nb = b.count as f64;
        let n = count as f64;
        let mut mean = vec![0.0; a.mean.len()];
        let mut m2 = vec![0.0; a.mean.len()];
        for i in 0..a.mean.len() {
            let delta = b.mean[i] - a.mean[i];
            mean[i] = a.mean[i] + delta * nb / n;
            m2[i] = a.m2[i] + b.m2[i] + delta * delta * na * nb / n;
        }
        VectorEstimator { count, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self, i: usize) -> f64 {
        if self.count > 1 {
            self.m2[i] / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn standard_error(&self, i: usize) -> Option<f64> {
        if self.count > 1 {
            Some((self.m2[i] / (self.count as f64 * (self.count - 1) as f64)).sqrt())
        } else {
            None
        }
    }

    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.mean.len())
            .map(|i| self.standard_error(i).unwrap_or(f64::INFINITY))
            .collect()
    }
}

/// Fold a list of per-block estimators with a fixed-fan-in pairwise tree.
fn tree_merge(mut blocks: Vec<Estimator>) -> Estimator {
    if blocks.is_empty() {
        return Estimator::new();
    }
    while blocks.len() > 1 {
        blocks = blocks
            .chunks(2)
            .map(|pair| {
                if pair.len() == 2 {
                    Estimator::merge(&pair[0], &pair[1])
                } else {
                    pair[0].clone()
                }
            })
            .collect();
    }
    blocks.pop().unwrap()
}

fn tree_merge_vector(mut blocks: Vec<VectorEstimator>) -> Option<VectorEstimator> {
    while blocks.len() > 1 {
        blocks = blocks
            .chunks(2)
            .map(|pair| {
                if pair.len() == 2 {
                    VectorEstimator::merge(&pair[0], &pair[1])
                } else {
                    pair[0].clone()
                }
            })
            .collect();
    }
    blocks.pop()
}

/// Parallel mean/variance of `f(draw)` over `draws` draws.
///
/// Blocks of [`BLOCK`] draws accumulate sequentially and merge in index
/// order, so the result does not depend on the rayon pool size.
pub fn parallel_estimate<F>(draws: u64, f: F) -> Result<Estimator>
where
    F: Fn(u64) -> f64 + Sync,
{
    let nblocks = draws.div_ceil(BLOCK);
    let blocks: Vec<Result<Estimator>> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let mut est = Estimator::new();
            let end = ((b + 1) * BLOCK).min(draws);
            for draw in b * BLOCK..end {
                est.accumulate(f(draw))?;
            }
            Ok(est)
        })
        .collect();
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(tree_merge(blocks))
}

/// Vector-valued analogue of [`parallel_estimate`].
pub fn parallel_estimate_vector<F>(draws: u64, len: usize, f: F) -> Result<VectorEstimator>
where
    F: Fn(u64, &mut Vec<f64>) + Sync,
{
    let nblocks = draws.div_ceil(BLOCK);
    let blocks: Vec<Result<VectorEstimator>> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let mut est = VectorEstimator::new(len);
            let mut buf = vec![0.0; len];
            let end = ((b + 1) * BLOCK).min(draws);
            for draw in b * BLOCK..end {
                f(draw, &mut buf);
                est.accumulate(&buf)?;
            }
            Ok(est)
        })
        .collect();
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(tree_merge_vector(blocks).unwrap_or_else(|| VectorEstimator::new(len)))
}
