//! Result rows, summaries and their CSV encodings.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use robust_knn::NoiseRates;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Knn,
    Rnn,
    RnnOracle,
    OneNn,
    /// k-NN trained on the clean labels.
    KnnNoiseFree,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Knn => "knn",
            Method::Rnn => "rnn",
            Method::RnnOracle => "rnn_oracle",
            Method::OneNn => "1nn",
            Method::KnnNoiseFree => "knn_noise_free",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "knn" => Some(Method::Knn),
            "rnn" => Some(Method::Rnn),
            "rnn_oracle" | "rnn-oracle" => Some(Method::RnnOracle),
            "1nn" => Some(Method::OneNn),
            "knn_noise_free" | "knn-noise-free" => Some(Method::KnnNoiseFree),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One evaluated (configuration, seed) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub experiment_id: String,
    pub seed: u64,
    pub method: Method,
    pub k: Option<usize>,
    pub k_prime: Option<usize>,
    pub n: usize,
    pub rates: NoiseRates,
    pub tau_hat: Option<(f64, f64)>,
    pub error_vs_clean: Option<f64>,
    pub error_vs_observed: Option<f64>,
    pub runtime_s: Option<f64>,
}

impl ExperimentResult {
    /// Error against clean labels where they exist, else against observed ones.
    pub fn test_error(&self) -> f64 {
        self.error_vs_clean
            .or(self.error_vs_observed)
            .expect("result carries at least one error")
    }
}

pub const RESULT_HEADER: [&str; 13] = [
    "experiment_id",
    "seed",
    "method",
    "k",
    "k_prime",
    "n",
    "tau_plus",
    "tau_minus",
    "tau_plus_hat",
    "tau_minus_hat",
    "error_vs_clean",
    "error_vs_observed",
    "runtime_s",
];

/// Decimal with 6 significant digits, shortest form.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn opt_f(v: Option<f64>) -> String {
    v.map(format_sig6).unwrap_or_default()
}

fn opt_u(v: Option<usize>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|source| HarnessError::Io {
        path: "<output>".into(),
        source,
    })
}

/// Stable ordering by (experiment, method, n, k, k'); rows of one
/// configuration keep their trial order.
pub fn sort_results(rows: &mut [ExperimentResult]) {
    rows.sort_by(|a, b| {
        (&a.experiment_id, a.method, a.n, a.k, a.k_prime).cmp(&(
            &b.experiment_id,
            b.method,
            b.n,
            b.k,
            b.k_prime,
        ))
    });
}

pub fn write_results<W: Write>(out: W, rows: &[ExperimentResult]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        let (tph, tmh) = match r.tau_hat {
            Some((p, m)) => (Some(p), Some(m)),
            None => (None, None),
        };
        w.write_record([
            r.experiment_id.clone(),
            r.seed.to_string(),
            r.method.to_string(),
            opt_u(r.k),
            opt_u(r.k_prime),
            r.n.to_string(),
            format_sig6(r.rates.tau_plus()),
            format_sig6(r.rates.tau_minus()),
            opt_f(tph),
            opt_f(tmh),
            opt_f(r.error_vs_clean),
            opt_f(r.error_vs_observed),
            opt_f(r.runtime_s),
        ])?;
    }
    finish(w)
}

/// Mean, sample standard deviation and standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        let count = values.len();
        if count == 0 {
            return Stats {
                mean: f64::NAN,
                std: f64::NAN,
                stderr: f64::NAN,
                count,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let std = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stats {
            mean,
            std,
            stderr: std / (count as f64).sqrt(),
            count,
        }
    }
}

/// Reference value attached to an experiment (Bayes error, band edges, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub experiment_id: String,
    pub name: &'static str,
    pub n: Option<usize>,
    pub rates: NoiseRates,
    pub value: f64,
    pub stderr: Option<f64>,
    pub samples: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment_id: String,
    pub method: String,
    pub k: Option<usize>,
    pub k_prime: Option<usize>,
    pub n: Option<usize>,
    pub rates: NoiseRates,
    pub metric: &'static str,
    pub stats: Stats,
}

/// How rows are pooled into summary lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// One line per (method, n, k, k') configuration.
    ByConfiguration,
    /// One line per method; for runs where `k` and `k'` are selected per fold.
    ByMethod,
}

type Metric = fn(&ExperimentResult) -> Option<f64>;

type GroupKey = (
    String,
    Method,
    usize,
    Option<usize>,
    Option<usize>,
    u64,
    u64,
);

/// Groups rows by configuration and summarizes each available metric.
pub fn summarize(
    rows: &[ExperimentResult],
    references: &[Reference],
    grouping: Grouping,
) -> Vec<SummaryRow> {
    let by_config = grouping == Grouping::ByConfiguration;
    let mut groups: BTreeMap<GroupKey, Vec<&ExperimentResult>> = BTreeMap::new();
    for r in rows {
        let key = (
            r.experiment_id.clone(),
            r.method,
            r.n,
            r.k.filter(|_| by_config),
            r.k_prime.filter(|_| by_config),
            r.rates.tau_plus().to_bits(),
            r.rates.tau_minus().to_bits(),
        );
        groups.entry(key).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((experiment_id, method, n, k, k_prime, ..), members) in groups {
        let rates = members[0].rates;
        let metrics: [(&'static str, Metric); 4] = [
            ("error_vs_clean", |r| r.error_vs_clean),
            ("error_vs_observed", |r| r.error_vs_observed),
            ("tau_plus_hat", |r| r.tau_hat.map(|t| t.0)),
            ("tau_minus_hat", |r| r.tau_hat.map(|t| t.1)),
        ];
        for (metric, get) in metrics {
            let values: Vec<f64> = members.iter().filter_map(|r| get(r)).collect();
            if values.is_empty() {
                continue;
            }
            out.push(SummaryRow {
                experiment_id: experiment_id.clone(),
                method: method.to_string(),
                k,
                k_prime,
                n: Some(n),
                rates,
                metric,
                stats: Stats::of(&values),
            });
        }
    }
    for r in references {
        out.push(SummaryRow {
            experiment_id: r.experiment_id.clone(),
            method: r.name.to_string(),
            k: None,
            k_prime: None,
            n: r.n,
            rates: r.rates,
            metric: "reference",
            stats: Stats {
                mean: r.value,
                std: f64::NAN,
                stderr: r.stderr.unwrap_or(f64::NAN),
                count: r.samples.map_or(1, |s| s as usize),
            },
        });
    }
    out
}

pub const SUMMARY_HEADER: [&str; 12] = [
    "experiment_id",
    "method",
    "k",
    "k_prime",
    "n",
    "tau_plus",
    "tau_minus",
    "metric",
    "mean",
    "std",
    "stderr",
    "count",
];

fn finite(v: f64) -> String {
    if v.is_finite() {
        format_sig6(v)
    } else {
        String::new()
    }
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment_id.clone(),
            r.method.clone(),
            opt_u(r.k),
            opt_u(r.k_prime),
            opt_u(r.n),
            format_sig6(r.rates.tau_plus()),
            format_sig6(r.rates.tau_minus()),
            r.metric.to_string(),
            finite(r.stats.mean),
            finite(r.stats.std),
            finite(r.stats.stderr),
            r.stats.count.to_string(),
        ])?;
    }
    finish(w)
}
