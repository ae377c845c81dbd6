//! Label-independent neighbor caches.
//!
//! Neighbor lists depend only on features, so a grid of `k` (and `k'`) values
//! over many relabelings of the same training set is evaluated from one
//! search per point. Vote fractions, noise estimates and decisions are the
//! same arithmetic the fitted models use, so results agree exactly.

use robust_knn::classify::majority_vote;
use robust_knn::rnn::{unilateral_correction, NoiseEstimate};
use robust_knn::{Dataset, Execution, Label, NeighborIndex};

use crate::error::Result;

/// The `width` nearest training indices for each of a set of points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborTable {
    width: usize,
    indices: Vec<u32>,
}

impl NeighborTable {
    /// Neighbors of each query point among the indexed training set.
    pub fn for_queries(
        index: &NeighborIndex,
        queries: &Dataset,
        width: usize,
        exec: Execution,
    ) -> Result<Self> {
        let rows = exec.map_range(queries.len(), |i| index.query_knn(queries.point(i), width));
        Self::collect(width, rows)
    }

    /// Neighbors of each training point among the other training points.
    pub fn for_training(index: &NeighborIndex, width: usize, exec: Execution) -> Result<Self> {
        let data = index.data();
        let rows = exec.map_range(data.len(), |j| {
            index.query_knn_excluding(data.point(j), width, Some(j))
        });
        Self::collect(width, rows)
    }

    fn collect(
        width: usize,
        rows: Vec<robust_knn::Result<robust_knn::NeighborList>>,
    ) -> Result<Self> {
        let mut indices = Vec::with_capacity(rows.len() * width);
        for r in rows {
            indices.extend(
                r?.indices()
                    .map(|i| u32::try_from(i).expect("index fits in u32")),
            );
        }
        Ok(NeighborTable { width, indices })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.indices.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.indices[i * self.width..(i + 1) * self.width]
    }

    /// Positive-label counts among the first `m` neighbors, `m = 0..=width`.
    pub fn votes(&self, labels: &[Label]) -> VoteTable {
        let stride = self.width + 1;
        let mut counts = Vec::with_capacity(self.len() * stride);
        for i in 0..self.len() {
            let mut acc = 0u32;
            counts.push(0);
            for &j in self.row(i) {
                acc += u32::from(labels[j as usize].is_positive());
                counts.push(acc);
            }
        }
        VoteTable { stride, counts }
    }
}

/// Prefix vote counts for one labeling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteTable {
    stride: usize,
    counts: Vec<u32>,
}

impl VoteTable {
    pub fn len(&self) -> usize {
        self.counts.len() / self.stride
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, i: usize, m: usize) -> u32 {
        self.counts[i * self.stride + m]
    }

    pub fn fraction(&self, i: usize, k: usize) -> f64 {
        self.count(i, k) as f64 / k as f64
    }

    pub fn knn_predict(&self, i: usize, k: usize) -> Label {
        majority_vote(self.count(i, k) as usize, k)
    }

    pub fn rnn_predict(&self, i: usize, k: usize, tau_plus_hat: f64, tau_minus_hat: f64) -> Label {
        unilateral_correction(self.fraction(i, k), tau_plus_hat, tau_minus_hat)
    }

    /// Noise estimate from a self-excluding training table and the labels it
    /// was counted with.
    pub fn noise_estimate(
        &self,
        labels: &[Label],
        k_prime: usize,
        quantile: f64,
    ) -> Result<NoiseEstimate> {
        let eta = labels
            .iter()
            .enumerate()
            .map(|(j, l)| {
                (u32::from(l.is_positive()) + self.count(j, k_prime)) as f64 / (k_prime + 1) as f64
            })
            .collect();
        Ok(NoiseEstimate::from_eta_hats(eta, quantile)?)
    }
}

/// Number of positions where `pred` and `truth` disagree.
pub fn mistakes(pred: impl IntoIterator<Item = Label>, truth: &[Label]) -> usize {
    pred.into_iter().zip(truth).filter(|(p, t)| p != *t).count()
}

pub fn error_rate(pred: impl IntoIterator<Item = Label>, truth: &[Label]) -> f64 {
    mistakes(pred, truth) as f64 / truth.len() as f64
}
