//! Plain k-NN majority vote and 1-NN.

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::neighbors::{Neighbor, NeighborIndex};

/// Number of positive labels among `neighbors`.
pub fn positive_count(data: &Dataset, neighbors: &[Neighbor]) -> usize {
    neighbors
        .iter()
        .filter(|n| data.label(n.index).is_positive())
        .count()
}

/// Fraction of positive labels among `neighbors`.
pub fn vote_fraction(data: &Dataset, neighbors: &[Neighbor]) -> f64 {
    positive_count(data, neighbors) as f64 / neighbors.len() as f64
}

/// 1 iff at least half of the `k` votes are positive (ties go to 1).
pub fn majority_vote(positives: usize, k: usize) -> Label {
    Label::from_bool(2 * positives >= k)
}

/// k-NN classifier over a (possibly noisy) training set.
#[derive(Debug, Clone)]
pub struct KnnModel {
    index: NeighborIndex,
    k: usize,
}

impl KnnModel {
    pub fn new(index: NeighborIndex, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("k must be at least 1".into()));
        }
        if k > index.len() {
            return Err(Error::KTooLarge { k, n: index.len() });
        }
        Ok(KnnModel { index, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn index(&self) -> &NeighborIndex {
        &self.index
    }

    /// Mean neighbor label, an estimate of the observed-label posterior at `q`.
    pub fn eta_hat_query(&self, q: &[f64]) -> Result<f64> {
        let nn = self.index.query_knn(q, self.k)?;
        Ok(vote_fraction(self.index.data(), nn.entries()))
    }

    pub fn predict(&self, q: &[f64]) -> Result<Label> {
        let nn = self.index.query_knn(q, self.k)?;
        Ok(majority_vote(
            positive_count(self.index.data(), nn.entries()),
            self.k,
        ))
    }
}

pub fn eta_hat_query(model: &KnnModel, q: &[f64]) -> Result<f64> {
    model.eta_hat_query(q)
}

pub fn predict_knn(model: &KnnModel, q: &[f64]) -> Result<Label> {
    model.predict(q)
}

/// Label of the nearest training point (lowest index on ties).
pub fn predict_1nn(index: &NeighborIndex, q: &[f64]) -> Result<Label> {
    let nn = index.query_knn(q, 1)?;
    Ok(index.data().label(nn.entries()[0].index))
}
