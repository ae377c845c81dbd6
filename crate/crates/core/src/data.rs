//! Shared domain types: labels, examples, datasets and noise rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary class label. `Positive` is class 1, `Negative` is class 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Negative = 0,
    Positive = 1,
}

impl Label {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn as_f64(self) -> f64 {
        self as u8 as f64
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.as_u8()
    }
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Label::try_from(v as i64)
    }
}

impl TryFrom<i64> for Label {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        match v {
            0 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(Error::InvalidLabel(other)),
        }
    }
}

/// Borrowed view of one example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example<'a> {
    pub x: &'a [f64],
    pub y: Label,
}

/// Dense, immutable labelled dataset.
///
/// Features are stored row-major. The position of an example is its identity
/// for neighbor tie-breaking everywhere in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<Label>,
}

#[derive(Deserialize)]
struct RawDataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<Label>,
}

impl TryFrom<RawDataset> for Dataset {
    type Error = Error;

    fn try_from(raw: RawDataset) -> Result<Self> {
        Dataset::from_flat(raw.dim, raw.features, raw.labels)
    }
}

impl Dataset {
    /// Builds a dataset from row-major features.
    pub fn from_flat(dim: usize, features: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if features.len() != dim * labels.len() {
            return Err(Error::LengthMismatch {
                what: "features",
                expected: dim * labels.len(),
                got: features.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: pos / dim });
        }
        Ok(Dataset {
            dim,
            features,
            labels,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], labels: Vec<Label>) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(1);
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: rows.len(),
                got: labels.len(),
            });
        }
        let mut features = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            features.extend_from_slice(row);
        }
        Dataset::from_flat(dim, features, labels)
    }

    /// Empty dataset of the given dimension.
    pub fn empty(dim: usize) -> Result<Self> {
        Dataset::from_flat(dim, Vec::new(), Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn example(&self, i: usize) -> Example<'_> {
        Example {
            x: self.point(i),
            y: self.labels[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Example<'_>> + '_ {
        (0..self.len()).map(move |i| self.example(i))
    }

    /// Same features, different labels.
    pub fn with_labels(&self, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: self.len(),
                got: labels.len(),
            });
        }
        Ok(Dataset {
            dim: self.dim,
            features: self.features.clone(),
            labels,
        })
    }

    /// Examples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.point(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            dim: self.dim,
            features,
            labels,
        }
    }

    /// First `n` examples.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Dataset {
            dim: self.dim,
            features: self.features[..n * self.dim].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|l| l.is_positive()).count() as f64 / self.len() as f64
    }

    pub(crate) fn check_query(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: q.len(),
            });
        }
        Ok(())
    }
}

/// Class-conditional flip probabilities.
///
/// `tau_plus` = Pr[observed 0 | true 1], `tau_minus` = Pr[observed 1 | true 0].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRates {
    tau_plus: f64,
    tau_minus: f64,
}

impl NoiseRates {
    pub fn new(tau_plus: f64, tau_minus: f64) -> Result<Self> {
        let ok = |t: f64| t.is_finite() && (0.0..1.0).contains(&t);
        if !ok(tau_plus) || !ok(tau_minus) || tau_plus + tau_minus >= 1.0 {
            return Err(Error::InvalidRates {
                tau_plus,
                tau_minus,
            });
        }
        Ok(NoiseRates {
            tau_plus,
            tau_minus,
        })
    }

    pub fn symmetric(tau: f64) -> Result<Self> {
        NoiseRates::new(tau, tau)
    }

    pub fn none() -> Self {
        NoiseRates {
            tau_plus: 0.0,
            tau_minus: 0.0,
        }
    }

    pub fn tau_plus(&self) -> f64 {
        self.tau_plus
    }

    pub fn tau_minus(&self) -> f64 {
        self.tau_minus
    }

    /// `1 - tau_plus - tau_minus`, strictly positive.
    pub fn contraction(&self) -> f64 {
        1.0 - self.tau_plus - self.tau_minus
    }

    pub fn is_symmetric(&self) -> bool {
        self.tau_plus == self.tau_minus
    }

    /// Rates after relabelling 0 <-> 1.
    pub fn swapped(&self) -> Self {
        NoiseRates {
            tau_plus: self.tau_minus,
            tau_minus: self.tau_plus,
        }
    }
}
