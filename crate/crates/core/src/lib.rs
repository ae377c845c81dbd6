//! Robust k-nearest-neighbor classification under class-conditional label noise.
//!
//! Labels are flipped independently with probability `tau_plus` (1 -> 0) and
//! `tau_minus` (0 -> 1). Plain k-NN stays consistent when the two rates are
//! equal but is biased otherwise; [`rnn`] estimates the rates from the
//! training data and corrects the vote on the side the noise favours.
//!
//! Modules:
//! - [`data`], [`seed`]: shared types and seeded randomness
//! - [`neighbors`]: exact kd-tree and brute-force k-NN
//! - [`noise`]: label-noise injection and posterior transforms
//! - [`classify`]: k-NN and 1-NN baselines
//! - [`rnn`]: noise estimation and the corrected classifier
//! - [`theory`]: Monte-Carlo masses and risk bounds for posterior models
//! - [`par`]: rayon-backed execution with a sequential fallback

pub mod classify;
pub mod data;
pub mod error;
pub mod neighbors;
pub mod noise;
pub mod par;
pub mod rnn;
pub mod seed;
pub mod theory;

pub use classify::{predict_1nn, predict_knn, KnnModel};
pub use data::{Dataset, Example, Label, NoiseRates};
pub use error::{Error, Result};
pub use neighbors::{brute_force_knn, build_index, Neighbor, NeighborIndex, NeighborList};
pub use noise::{clean_eta, corrupted_eta, inject_noise, NoisySample};
pub use par::Execution;
pub use rnn::{estimate_noise, fit_rnn, predict_rnn, EstimateOptions, NoiseEstimate, RnnModel};
pub use seed::{derive_seed, Seed};
pub use theory::{ConditionalModel, McEstimate, MonteCarlo};
