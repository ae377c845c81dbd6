//! Synthetic and benchmark experiment runners.
//!
//! Each run draws its data once from the base seed and then re-injects noise
//! `trials` times; trial `t` uses noise seed `seed.derive(NOISE).derive(t)`.
//! Noise is drawn one uniform per example in order, so the labels of a prefix
//! of the training set are the same under every prefix length.

use std::f64::consts::PI;
use std::time::Instant;

use rand::seq::SliceRandom;
use robust_knn::noise::flip_labels;
use robust_knn::theory::{self, synthetic_bayes_error, ConditionalModel, MonteCarlo};
use robust_knn::{Dataset, Execution, Label, NeighborIndex, NoiseRates, Seed};

use crate::cv::default_grid;
use crate::error::{HarnessError, Result};
use crate::eval::{mistakes, NeighborTable};
use crate::preprocess::Scaling;
use crate::results::{sort_results, ExperimentResult, Method, Reference};

const STREAM_DATA: u64 = 11;
const STREAM_NOISE: u64 = 12;
const STREAM_MC: u64 = 13;
const STREAM_SPLIT: u64 = 14;

/// Settings shared by every experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub trials: usize,
    pub grid_k: Vec<usize>,
    pub grid_k_prime: Vec<usize>,
    pub grid_n: Vec<usize>,
    /// Fixed `k` where `k` is not the swept parameter.
    pub k: usize,
    /// Fixed `k'` where `k'` is not the swept parameter.
    pub k_prime: usize,
    pub rates: NoiseRates,
    pub quantile: f64,
    /// Target standard error of the Monte-Carlo reference values.
    pub mc_precision: f64,
    pub execution: Execution,
    pub record_runtime: bool,
}

impl ExperimentConfig {
    fn base(rates: NoiseRates) -> Self {
        ExperimentConfig {
            n_train: 4000,
            n_test: 3000,
            trials: 40,
            grid_k: default_grid(),
            grid_k_prime: default_grid(),
            grid_n: vec![500, 1000, 2000, 4000, 8000, 16_000, 32_000, 64_000],
            k: 50,
            k_prime: 50,
            rates,
            quantile: 0.0,
            mc_precision: 2e-4,
            execution: Execution::default(),
            record_runtime: false,
        }
    }

    /// Asymmetric rates (0.1, 0.3).
    pub fn fig1a() -> Self {
        Self::base(NoiseRates::new(0.1, 0.3).expect("valid rates"))
    }

    /// Symmetric rate 0.2.
    pub fn fig1b() -> Self {
        Self::base(NoiseRates::symmetric(0.2).expect("valid rates"))
    }

    /// Symmetric rate 0.2 over training sizes 500 to 64000.
    pub fn fig1c() -> Self {
        Self::base(NoiseRates::symmetric(0.2).expect("valid rates"))
    }

    /// Asymmetric rates (0.1, 0.2); `n` swept over 500 to 8000.
    pub fn sweep() -> Self {
        ExperimentConfig {
            grid_n: vec![500, 1000, 2000, 4000, 8000],
            ..Self::base(NoiseRates::new(0.1, 0.2).expect("valid rates"))
        }
    }
}

/// Rows plus the reference values that go with them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ExperimentResult>,
    pub references: Vec<Reference>,
}

impl ExperimentOutput {
    fn finish(mut self) -> Self {
        sort_results(&mut self.rows);
        self
    }
}

/// What to evaluate on one (train, test) pair.
struct Grid<'a> {
    id: &'a str,
    ks: &'a [usize],
    k_primes: &'a [usize],
    methods: &'a [Method],
}

fn noise_seed(seed: Seed, trial: usize) -> Seed {
    seed.derive(STREAM_NOISE).derive(trial as u64)
}

/// Evaluates every method at every `k` (and `k'` for RNN) for each noise trial.
fn evaluate_grid(
    train: &Dataset,
    test: &Dataset,
    grid: &Grid<'_>,
    cfg: &ExperimentConfig,
    seed: Seed,
) -> Result<Vec<ExperimentResult>> {
    let n = train.len();
    let k_max = grid.ks.iter().copied().max().unwrap_or(1);
    if grid.ks.is_empty() || grid.ks.contains(&0) || k_max > n {
        return Err(HarnessError::Config(format!("k grid must lie in 1..={n}")));
    }
    let needs_estimate = grid.methods.contains(&Method::Rnn);
    let kp_max = grid.k_primes.iter().copied().max().unwrap_or(0);
    if needs_estimate && (grid.k_primes.is_empty() || kp_max >= n) {
        return Err(HarnessError::Config(format!("k' grid must lie in 0..{n}")));
    }
    let index = NeighborIndex::build(train.clone())?;
    let queries = NeighborTable::for_queries(&index, test, k_max, cfg.execution)?;
    let training = if needs_estimate {
        Some(NeighborTable::for_training(&index, kp_max, cfg.execution)?)
    } else {
        None
    };
    let n_test = test.len() as f64;
    let row = |method,
               k,
               k_prime,
               rates,
               seed: Seed,
               tau_hat,
               preds: &[Label],
               observed: &[Label],
               t: f64| {
        ExperimentResult {
            experiment_id: grid.id.to_string(),
            seed: seed.value(),
            method,
            k: Some(k),
            k_prime,
            n,
            rates,
            tau_hat,
            error_vs_clean: Some(mistakes(preds.iter().copied(), test.labels()) as f64 / n_test),
            error_vs_observed: Some(mistakes(preds.iter().copied(), observed) as f64 / n_test),
            runtime_s: cfg.record_runtime.then_some(t),
        }
    };

    let mut rows = Vec::new();
    if grid.methods.contains(&Method::KnnNoiseFree) {
        let votes = queries.votes(train.labels());
        for &k in grid.ks {
            let t0 = Instant::now();
            let preds: Vec<Label> = (0..test.len()).map(|i| votes.knn_predict(i, k)).collect();
            let t = t0.elapsed().as_secs_f64();
            rows.push(row(
                Method::KnnNoiseFree,
                k,
                None,
                NoiseRates::none(),
                seed,
                None,
                &preds,
                test.labels(),
                t,
            ));
        }
    }

    let per_trial = cfg
        .execution
        .map_range(cfg.trials, |trial| -> Result<Vec<ExperimentResult>> {
            let ns = noise_seed(seed, trial);
            let noisy = flip_labels(train.labels(), cfg.rates, ns.derive(0));
            let observed = flip_labels(test.labels(), cfg.rates, ns.derive(1));
            let votes = queries.votes(&noisy);
            let estimates = match &training {
                Some(table) => {
                    let tv = table.votes(&noisy);
                    grid.k_primes
                        .iter()
                        .map(|&kp| Ok((kp, tv.noise_estimate(&noisy, kp, cfg.quantile)?)))
                        .collect::<Result<Vec<_>>>()?
                }
                None => Vec::new(),
            };
            let mut out = Vec::new();
            for &k in grid.ks {
                for &method in grid.methods {
                    let t0 = Instant::now();
                    match method {
                        Method::Knn | Method::OneNn => {
                            let preds: Vec<Label> =
                                (0..test.len()).map(|i| votes.knn_predict(i, k)).collect();
                            let t = t0.elapsed().as_secs_f64();
                            out.push(row(
                                method, k, None, cfg.rates, ns, None, &preds, &observed, t,
                            ));
                        }
                        Method::RnnOracle => {
                            let (tp, tm) = (cfg.rates.tau_plus(), cfg.rates.tau_minus());
                            let preds: Vec<Label> = (0..test.len())
                                .map(|i| votes.rnn_predict(i, k, tp, tm))
                                .collect();
                            let t = t0.elapsed().as_secs_f64();
                            out.push(row(
                                method,
                                k,
                                None,
                                cfg.rates,
                                ns,
                                Some((tp, tm)),
                                &preds,
                                &observed,
                                t,
                            ));
                        }
                        Method::Rnn => {
                            for (kp, est) in &estimates {
                                let t0 = Instant::now();
                                let (tp, tm) = (est.tau_plus_hat(), est.tau_minus_hat());
                                let preds: Vec<Label> = (0..test.len())
                                    .map(|i| votes.rnn_predict(i, k, tp, tm))
                                    .collect();
                                let t = t0.elapsed().as_secs_f64();
                                out.push(row(
                                    method,
                                    k,
                                    Some(*kp),
                                    cfg.rates,
                                    ns,
                                    Some((tp, tm)),
                                    &preds,
                                    &observed,
                                    t,
                                ));
                            }
                        }
                        Method::KnnNoiseFree => {}
                    }
                }
            }
            Ok(out)
        });
    for r in per_trial {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Training and test samples from the synthetic model for `seed`.
pub fn synthetic_split(n_train: usize, n_test: usize, seed: Seed) -> (Dataset, Dataset) {
    let model = ConditionalModel::synthetic();
    let data = seed.derive(STREAM_DATA);
    (
        model.sample_labeled(n_train, data.derive(0)),
        model.sample_labeled(n_test, data.derive(1)),
    )
}

fn mc(cfg: &ExperimentConfig, seed: Seed) -> MonteCarlo {
    MonteCarlo::new(cfg.mc_precision, seed.derive(STREAM_MC)).with_execution(cfg.execution)
}

fn bayes_references(id: &str, cfg: &ExperimentConfig, seed: Seed) -> Result<Vec<Reference>> {
    let est = theory::bayes_error(&ConditionalModel::synthetic(), &mc(cfg, seed))?;
    Ok(vec![
        Reference {
            experiment_id: id.into(),
            name: "bayes_error",
            n: None,
            rates: cfg.rates,
            value: synthetic_bayes_error(),
            stderr: None,
            samples: None,
        },
        Reference {
            experiment_id: id.into(),
            name: "bayes_error_mc",
            n: None,
            rates: cfg.rates,
            value: est.value,
            stderr: Some(est.std_error),
            samples: Some(est.samples),
        },
    ])
}

/// k-NN, RNN (`k'` fixed) and RNN with the true rates across the `k` grid
/// under asymmetric noise.
pub fn run_fig1a(cfg: &ExperimentConfig, seed: Seed) -> Result<ExperimentOutput> {
    let (train, test) = synthetic_split(cfg.n_train, cfg.n_test, seed);
    let grid = Grid {
        id: "fig1a",
        ks: &cfg.grid_k,
        k_primes: &[cfg.k_prime],
        methods: &[Method::Knn, Method::Rnn, Method::RnnOracle],
    };
    let rows = evaluate_grid(&train, &test, &grid, cfg, seed)?;
    let mut references = bayes_references("fig1a", cfg, seed)?;
    let a0 = theory::a0_probability(&ConditionalModel::synthetic(), cfg.rates, &mc(cfg, seed))?;
    references.push(Reference {
        experiment_id: "fig1a".into(),
        name: "a0_probability",
        n: None,
        rates: cfg.rates,
        value: a0.value,
        stderr: Some(a0.std_error),
        samples: Some(a0.samples),
    });
    Ok(ExperimentOutput { rows, references }.finish())
}

fn require_symmetric(cfg: &ExperimentConfig) -> Result<f64> {
    if !cfg.rates.is_symmetric() {
        return Err(HarnessError::Config(
            "this experiment needs tau_plus == tau_minus".into(),
        ));
    }
    Ok(cfg.rates.tau_plus())
}

/// k-NN across the `k` grid under symmetric noise, with the noise-free curve.
pub fn run_fig1b(cfg: &ExperimentConfig, seed: Seed) -> Result<ExperimentOutput> {
    require_symmetric(cfg)?;
    let (train, test) = synthetic_split(cfg.n_train, cfg.n_test, seed);
    let grid = Grid {
        id: "fig1b",
        ks: &cfg.grid_k,
        k_primes: &[],
        methods: &[Method::Knn, Method::KnnNoiseFree],
    };
    let rows = evaluate_grid(&train, &test, &grid, cfg, seed)?;
    let references = bayes_references("fig1b", cfg, seed)?;
    Ok(ExperimentOutput { rows, references }.finish())
}

/// 1-NN error across training sizes under symmetric noise, with the
/// theoretical band at each size.
pub fn run_fig1c(cfg: &ExperimentConfig, seed: Seed) -> Result<ExperimentOutput> {
    let tau = require_symmetric(cfg)?;
    let n_max = cfg.grid_n.iter().copied().max().unwrap_or(0);
    if n_max == 0 {
        return Err(HarnessError::Config("empty n grid".into()));
    }
    let (train, test) = synthetic_split(n_max, cfg.n_test, seed);
    let grid = Grid {
        id: "fig1c",
        ks: &[1],
        k_primes: &[],
        methods: &[Method::OneNn],
    };
    let mut out = ExperimentOutput {
        references: bayes_references("fig1c", cfg, seed)?,
        ..Default::default()
    };
    let r_star = synthetic_bayes_error();
    for &n in &cfg.grid_n {
        out.rows
            .extend(evaluate_grid(&train.prefix(n), &test, &grid, cfg, seed)?);
        let (lo, hi) = theory::one_nn_risk_band(tau, r_star, PI * 2f64.sqrt(), 2, n)?;
        for (name, value) in [("band_lower", lo), ("band_upper", hi)] {
            out.references.push(Reference {
                experiment_id: "fig1c".into(),
                name,
                n: Some(n),
                rates: cfg.rates,
                value,
                stderr: None,
                samples: None,
            });
        }
    }
    Ok(out.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    K,
    KPrime,
    N,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::KPrime => "k_prime",
            SweepParam::N => "n",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "k" => Some(SweepParam::K),
            "k_prime" | "k-prime" => Some(SweepParam::KPrime),
            "n" => Some(SweepParam::N),
            _ => None,
        }
    }
}

/// Seeded 75/25 split of a benchmark dataset, scaled to `[-1, 1]` with the
/// training part's ranges.
pub fn benchmark_split(data: &Dataset, seed: Seed) -> Result<(Dataset, Dataset)> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut seed.derive(STREAM_SPLIT).rng());
    let n_train = (data.len() * 3).div_ceil(4);
    if n_train == 0 || n_train == data.len() {
        return Err(HarnessError::Data(format!(
            "{} examples are too few to split",
            data.len()
        )));
    }
    let train = data.subset(&order[..n_train]);
    let test = data.subset(&order[n_train..]);
    let s = Scaling::fit(&train);
    Ok((s.apply(&train)?, s.apply(&test)?))
}

/// RNN error as one parameter varies and the others stay at their defaults.
///
/// Runs on the synthetic model, or on `benchmark` (split 75/25) if given.
pub fn run_param_sweep(
    which: SweepParam,
    cfg: &ExperimentConfig,
    benchmark: Option<&Dataset>,
    seed: Seed,
) -> Result<ExperimentOutput> {
    let id = format!("sweep_{}", which.name());
    let (train, test) = match benchmark {
        Some(d) => benchmark_split(d, seed)?,
        None => {
            let n = match which {
                SweepParam::N => cfg.grid_n.iter().copied().max().unwrap_or(0),
                _ => cfg.n_train,
            };
            synthetic_split(n, cfg.n_test, seed)
        }
    };
    let methods = [Method::Rnn];
    let mut out = ExperimentOutput::default();
    match which {
        SweepParam::K => {
            let grid = Grid {
                id: &id,
                ks: &cfg.grid_k,
                k_primes: &[cfg.k_prime],
                methods: &methods,
            };
            out.rows = evaluate_grid(&train, &test, &grid, cfg, seed)?;
        }
        SweepParam::KPrime => {
            let grid = Grid {
                id: &id,
                ks: &[cfg.k],
                k_primes: &cfg.grid_k_prime,
                methods: &methods,
            };
            out.rows = evaluate_grid(&train, &test, &grid, cfg, seed)?;
        }
        SweepParam::N => {
            let grid = Grid {
                id: &id,
                ks: &[cfg.k],
                k_primes: &[cfg.k_prime],
                methods: &methods,
            };
            let sizes: Vec<usize> = cfg
                .grid_n
                .iter()
                .copied()
                .filter(|&n| n <= train.len())
                .collect();
            if sizes.is_empty() {
                return Err(HarnessError::Config(format!(
                    "no n in the grid fits {} training examples",
                    train.len()
                )));
            }
            for n in sizes {
                out.rows
                    .extend(evaluate_grid(&train.prefix(n), &test, &grid, cfg, seed)?);
            }
        }
    }
    if benchmark.is_none() {
        out.references = bayes_references(&id, cfg, seed)?;
    }
    Ok(out.finish())
}
