//! Robust k-NN: noise-rate estimation from k'-neighborhoods of the training
//! points, followed by a one-sided correction of the k-NN vote.
//!
//! The observed-label posterior is an affine image of the clean one,
//! `eta_hat = (1 - tau_plus - tau_minus) * eta + tau_minus`, so it lives in
//! `[tau_minus, 1 - tau_plus]`. Its minimum over the training points
//! estimates `tau_minus` and the minimum of `1 - eta_hat` estimates
//! `tau_plus`. When `tau_minus > tau_plus` the noise pushes some truly
//! negative regions just above one half; votes landing in
//! `(1/2, 1/2 + (tau_minus - tau_plus)/2)` are turned back to 0. The mirror
//! case turns votes in `(1/2 - (tau_plus - tau_minus)/2, 1/2)` into 1.

use std::sync::Arc;

use crate::classify::{positive_count, vote_fraction, KnnModel};
use crate::data::{Dataset, Label, NoiseRates};
use crate::error::{Error, Result};
use crate::neighbors::NeighborIndex;
use crate::noise::NoisySample;
use crate::par::Execution;

/// Estimated flip rates and the per-training-point posteriors behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEstimate {
    tau_plus_hat: f64,
    tau_minus_hat: f64,
    per_point_eta_hat: Vec<f64>,
}

impl NoiseEstimate {
    /// Estimate from per-point posteriors: the `quantile`-th lower order
    /// statistic of `eta_hat` and of `1 - eta_hat` (`0.0` is the minimum).
    pub fn from_eta_hats(per_point_eta_hat: Vec<f64>, quantile: f64) -> Result<Self> {
        if per_point_eta_hat.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !(0.0..0.5).contains(&quantile) {
            return Err(Error::Domain(format!(
                "quantile {quantile} outside [0, 0.5)"
            )));
        }
        let mut eta: Vec<f64> = per_point_eta_hat.clone();
        let mut comp: Vec<f64> = per_point_eta_hat.iter().map(|e| 1.0 - e).collect();
        let tau_minus_hat = lower_quantile(&mut eta, quantile);
        let tau_plus_hat = lower_quantile(&mut comp, quantile);
        assert!(
            tau_plus_hat + tau_minus_hat <= 1.0 + 1e-12,
            "estimated rates sum above one"
        );
        Ok(NoiseEstimate {
            tau_plus_hat,
            tau_minus_hat,
            per_point_eta_hat,
        })
    }

    /// Estimate pinned to known rates, with no per-point data.
    pub fn from_rates(rates: NoiseRates) -> Self {
        NoiseEstimate {
            tau_plus_hat: rates.tau_plus(),
            tau_minus_hat: rates.tau_minus(),
            per_point_eta_hat: Vec::new(),
        }
    }

    pub fn tau_plus_hat(&self) -> f64 {
        self.tau_plus_hat
    }

    pub fn tau_minus_hat(&self) -> f64 {
        self.tau_minus_hat
    }

    pub fn per_point_eta_hat(&self) -> &[f64] {
        &self.per_point_eta_hat
    }
}

fn lower_quantile(values: &mut [f64], q: f64) -> f64 {
    let rank = (q * (values.len() - 1) as f64).floor() as usize;
    if rank == 0 {
        return values.iter().copied().fold(f64::INFINITY, f64::min);
    }
    let (_, v, _) = values.select_nth_unstable_by(rank, f64::total_cmp);
    *v
}

/// Options for [`estimate_noise_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    /// Order statistic used in place of the minimum; `0.0` is the strict minimum.
    pub quantile: f64,
    pub execution: Execution,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            quantile: 0.0,
            execution: Execution::default(),
        }
    }
}

fn check_k_prime(index: &NeighborIndex, k_prime: usize) -> Result<()> {
    if k_prime + 1 > index.len() {
        return Err(Error::KTooLarge {
            k: k_prime,
            n: index.len() - 1,
        });
    }
    Ok(())
}

/// Posterior at training point `j`: its own label averaged with the labels
/// of its `k_prime` nearest other points.
pub fn eta_hat_train(index: &NeighborIndex, j: usize, k_prime: usize) -> Result<f64> {
    check_k_prime(index, k_prime)?;
    let data = index.data();
    let nn = index.query_knn_excluding(data.point(j), k_prime, Some(j))?;
    let own = usize::from(data.label(j).is_positive());
    Ok((own + positive_count(data, nn.entries())) as f64 / (k_prime + 1) as f64)
}

pub fn estimate_noise(index: &NeighborIndex, k_prime: usize) -> Result<NoiseEstimate> {
    estimate_noise_with(index, k_prime, EstimateOptions::default())
}

pub fn estimate_noise_with(
    index: &NeighborIndex,
    k_prime: usize,
    opts: EstimateOptions,
) -> Result<NoiseEstimate> {
    let mut all = estimate_noise_grid(index, &[k_prime], opts)?;
    Ok(all.remove(0))
}

/// Noise estimates for several `k_prime` values from one neighbor pass.
///
/// Each training point is queried once with the largest `k_prime`; smaller
/// values reuse the prefix of that neighbor list.
pub fn estimate_noise_grid(
    index: &NeighborIndex,
    k_primes: &[usize],
    opts: EstimateOptions,
) -> Result<Vec<NoiseEstimate>> {
    let Some(&k_max) = k_primes.iter().max() else {
        return Ok(Vec::new());
    };
    check_k_prime(index, k_max)?;
    let data = index.data();
    let counts: Vec<Result<Vec<usize>>> = opts.execution.map_range(data.len(), |j| {
        let nn = index.query_knn_excluding(data.point(j), k_max, Some(j))?;
        let mut acc = usize::from(data.label(j).is_positive());
        let mut prefix = Vec::with_capacity(k_max + 1);
        prefix.push(acc);
        for n in nn.entries() {
            acc += usize::from(data.label(n.index).is_positive());
            prefix.push(acc);
        }
        Ok(prefix)
    });
    let counts = counts.into_iter().collect::<Result<Vec<_>>>()?;
    k_primes
        .iter()
        .map(|&kp| {
            let eta = counts
                .iter()
                .map(|p| p[kp] as f64 / (kp + 1) as f64)
                .collect();
            NoiseEstimate::from_eta_hats(eta, opts.quantile)
        })
        .collect()
}

/// Corrected k-NN decision for vote fraction `eta_hat`.
///
/// Base decision is `eta_hat >= 1/2`. The correction band is open at both
/// ends; a vote exactly on an endpoint keeps its base label.
pub fn unilateral_correction(eta_hat: f64, tau_plus_hat: f64, tau_minus_hat: f64) -> Label {
    let margin = 2.0 * eta_hat - 1.0;
    let gap = tau_minus_hat - tau_plus_hat;
    let base = Label::from_bool(eta_hat >= 0.5);
    if gap > 0.0 && margin > 0.0 && margin < gap {
        Label::Negative
    } else if gap < 0.0 && margin < 0.0 && margin > gap {
        Label::Positive
    } else {
        base
    }
}

/// Fitted robust k-NN classifier.
#[derive(Debug, Clone)]
pub struct RnnModel {
    knn: KnnModel,
    k_prime: usize,
    estimate: NoiseEstimate,
}

impl RnnModel {
    pub fn fit(
        data: impl Into<Arc<Dataset>>,
        k: usize,
        k_prime: usize,
        opts: EstimateOptions,
    ) -> Result<Self> {
        let index = NeighborIndex::build(data)?;
        let knn = KnnModel::new(index, k)?;
        let estimate = estimate_noise_with(knn.index(), k_prime, opts)?;
        Ok(RnnModel {
            knn,
            k_prime,
            estimate,
        })
    }

    /// Model using a given estimate instead of fitting one (e.g. the true rates).
    pub fn with_estimate(
        index: NeighborIndex,
        k: usize,
        k_prime: usize,
        estimate: NoiseEstimate,
    ) -> Result<Self> {
        check_k_prime(&index, k_prime)?;
        Ok(RnnModel {
            knn: KnnModel::new(index, k)?,
            k_prime,
            estimate,
        })
    }

    pub fn k(&self) -> usize {
        self.knn.k()
    }

    pub fn k_prime(&self) -> usize {
        self.k_prime
    }

    pub fn estimate(&self) -> &NoiseEstimate {
        &self.estimate
    }

    pub fn index(&self) -> &NeighborIndex {
        self.knn.index()
    }

    pub fn eta_hat_query(&self, q: &[f64]) -> Result<f64> {
        self.knn.eta_hat_query(q)
    }

    pub fn predict(&self, q: &[f64]) -> Result<Label> {
        let nn = self.index().query_knn(q, self.k())?;
        let e = vote_fraction(self.index().data(), nn.entries());
        Ok(unilateral_correction(
            e,
            self.estimate.tau_plus_hat,
            self.estimate.tau_minus_hat,
        ))
    }
}

pub fn fit_rnn(noisy: &NoisySample, k: usize, k_prime: usize) -> Result<RnnModel> {
    RnnModel::fit(noisy.data().clone(), k, k_prime, EstimateOptions::default())
}

pub fn predict_rnn(model: &RnnModel, q: &[f64]) -> Result<Label> {
    model.predict(q)
}
