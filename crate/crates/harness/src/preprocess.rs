//! Feature scaling and class grouping for benchmark data.

use rand::seq::SliceRandom;
use robust_knn::{Dataset, Label, Seed};

use crate::error::{HarnessError, Result};
use crate::io::RawDataset;

/// Per-feature min-max map onto `[-1, 1]`, fitted on one dataset and
/// reusable on others.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Scaling {
    pub fn fit(data: &Dataset) -> Self {
        let d = data.dim();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for i in 0..data.len() {
            for (j, &v) in data.point(i).iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Scaling { min, max }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    fn map(&self, j: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[j], self.max[j]);
        if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
            return 0.0;
        }
        2.0 * (v - lo) / (hi - lo) - 1.0
    }

    /// Points outside the fitted range land outside `[-1, 1]`.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.dim() != self.dim() {
            return Err(robust_knn::Error::DimensionMismatch {
                expected: self.dim(),
                got: data.dim(),
            }
            .into());
        }
        let d = self.dim();
        let features = data
            .features()
            .iter()
            .enumerate()
            .map(|(i, &v)| self.map(i % d, v))
            .collect();
        Ok(Dataset::from_flat(d, features, data.labels().to_vec())?)
    }
}

pub fn scale_features(data: &Dataset) -> (Dataset, Scaling) {
    let s = Scaling::fit(data);
    let scaled = s.apply(data).expect("scaling fitted on the same data");
    (scaled, s)
}

/// Which original classes became label 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassGrouping {
    pub positive: Vec<i64>,
    pub negative: Vec<i64>,
}

impl ClassGrouping {
    pub fn label_of(&self, class: i64) -> Option<Label> {
        if self.positive.contains(&class) {
            Some(Label::Positive)
        } else if self.negative.contains(&class) {
            Some(Label::Negative)
        } else {
            None
        }
    }

    /// Maps every row of `raw`; classes unseen at grouping time are an error.
    pub fn apply(&self, raw: &RawDataset) -> Result<Dataset> {
        let labels = raw
            .labels
            .iter()
            .map(|&c| {
                self.label_of(c).ok_or_else(|| {
                    HarnessError::Data(format!("class {c} was not present in the training data"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset::from_flat(raw.dim, raw.features.clone(), labels)?)
    }
}

/// Splits the classes into two groups.
///
/// Two classes: the larger label value becomes 1. More classes: they are
/// shuffled by `seed`, the first half becomes 1 and, for an odd count, the
/// positive group takes the extra class.
pub fn group_classes(classes: &[i64], seed: Seed) -> Result<ClassGrouping> {
    let mut classes = classes.to_vec();
    classes.sort_unstable();
    classes.dedup();
    match classes.len() {
        0 | 1 => Err(HarnessError::Data(format!(
            "need at least two classes, found {}",
            classes.len()
        ))),
        2 => Ok(ClassGrouping {
            positive: vec![classes[1]],
            negative: vec![classes[0]],
        }),
        c => {
            if c % 2 == 1 {
                log::warn!("{c} classes cannot be split evenly; the positive group gets one extra");
            }
            classes.shuffle(&mut seed.rng());
            let (pos, neg) = classes.split_at(c.div_ceil(2));
            let mut positive = pos.to_vec();
            let mut negative = neg.to_vec();
            positive.sort_unstable();
            negative.sort_unstable();
            Ok(ClassGrouping { positive, negative })
        }
    }
}

pub fn binarize_multiclass(raw: &RawDataset, seed: Seed) -> Result<(Dataset, ClassGrouping)> {
    let grouping = group_classes(&raw.classes(), seed)?;
    let data = grouping.apply(raw)?;
    Ok((data, grouping))
}
