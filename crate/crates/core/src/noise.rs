//! Class-conditional random label noise.

use rand::Rng;

use crate::data::{Dataset, Label, NoiseRates};
use crate::error::Result;
use crate::seed::Seed;

/// Noisy training data together with the labels it was derived from.
///
/// Classifiers only ever see [`NoisySample::data`]; `true_labels` is kept for
/// evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisySample {
    data: Dataset,
    true_labels: Vec<Label>,
    rates: NoiseRates,
    seed: Seed,
}

impl NoisySample {
    /// The corrupted dataset.
    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn into_data(self) -> Dataset {
        self.data
    }

    pub fn true_labels(&self) -> &[Label] {
        &self.true_labels
    }

    pub fn rates(&self) -> NoiseRates {
        self.rates
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn flipped_count(&self) -> usize {
        self.data
            .labels()
            .iter()
            .zip(&self.true_labels)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Flips each label independently: 1 -> 0 with probability `tau_plus`,
/// 0 -> 1 with probability `tau_minus`.
///
/// One uniform draw is consumed per example, in dataset order, so the flip
/// decision for example `i` depends only on the seed and `i`.
pub fn flip_labels(labels: &[Label], rates: NoiseRates, seed: Seed) -> Vec<Label> {
    let mut rng = seed.rng();
    labels
        .iter()
        .map(|&y| {
            let u: f64 = rng.gen();
            let p = match y {
                Label::Positive => rates.tau_plus(),
                Label::Negative => rates.tau_minus(),
            };
            if u < p {
                y.flipped()
            } else {
                y
            }
        })
        .collect()
}

pub fn inject_noise(data: &Dataset, rates: NoiseRates, seed: Seed) -> Result<NoisySample> {
    let noisy = flip_labels(data.labels(), rates, seed);
    Ok(NoisySample {
        data: data.with_labels(noisy)?,
        true_labels: data.labels().to_vec(),
        rates,
        seed,
    })
}

/// Posterior of the observed label given the clean posterior `eta`.
pub fn corrupted_eta(eta: f64, rates: NoiseRates) -> f64 {
    rates.contraction() * eta + rates.tau_minus()
}

/// Inverse of [`corrupted_eta`], clamped to `[0, 1]`.
pub fn clean_eta(eta_hat: f64, rates: NoiseRates) -> f64 {
    ((eta_hat - rates.tau_minus()) / rates.contraction()).clamp(0.0, 1.0)
}
