//! Experiment harness for robust k-NN: dataset loading and preprocessing,
//! repeated cross-validation, the synthetic consistency experiments and
//! parameter sweeps, with CSV output.

pub mod cv;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod io;
pub mod preprocess;
pub mod results;

pub use cv::{run_cv, CvPlan};
pub use error::{HarnessError, Result};
pub use experiments::{
    run_fig1a, run_fig1b, run_fig1c, run_param_sweep, ExperimentConfig, ExperimentOutput,
    SweepParam,
};
pub use io::{load_dataset, DataFormat, RawDataset};
pub use preprocess::{binarize_multiclass, scale_features, ClassGrouping, Scaling};
pub use results::{ExperimentResult, Method};

use std::path::Path;

use robust_knn::{Dataset, Seed};

/// Loads a dataset and maps its classes to binary labels, grouping classes
/// with a stream derived from `seed` when there are more than two.
pub fn load_binary(
    path: &Path,
    format: DataFormat,
    seed: Seed,
) -> Result<(Dataset, ClassGrouping, RawDataset)> {
    let raw = load_dataset(path, format)?;
    let (data, grouping) = binarize_multiclass(&raw, seed.derive(0xC1A5))?;
    Ok((data, grouping, raw))
}
