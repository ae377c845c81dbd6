//! Repeated k-fold cross-validation with inner grid search on noisy labels.

use std::time::Instant;

use rand::seq::SliceRandom;
use robust_knn::noise::flip_labels;
use robust_knn::{Dataset, Execution, Label, NeighborIndex, NoiseRates, Seed};

use crate::error::{HarnessError, Result};
use crate::eval::{mistakes, NeighborTable};
use crate::preprocess::Scaling;
use crate::results::{ExperimentResult, Method};

const STREAM_OUTER: u64 = 1;
const STREAM_INNER: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// Grid of 5, 10, ..., 100.
pub fn default_grid() -> Vec<usize> {
    (5..=100).step_by(5).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    pub outer_trials: usize,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub grid_k: Vec<usize>,
    pub grid_k_prime: Vec<usize>,
    /// Order statistic for the noise estimate; `0.0` is the minimum.
    pub quantile: f64,
    pub execution: Execution,
    pub record_runtime: bool,
}

impl Default for CvPlan {
    fn default() -> Self {
        CvPlan {
            outer_trials: 10,
            outer_folds: 4,
            inner_folds: 4,
            grid_k: default_grid(),
            grid_k_prime: default_grid(),
            quantile: 0.0,
            execution: Execution::default(),
            record_runtime: false,
        }
    }
}

/// Fold id of each of `n` examples: a seeded shuffle dealt round-robin, so
/// fold sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: Seed) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.rng());
    let mut fold = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        fold[i] = rank % folds;
    }
    fold
}

/// Outer fold ids for one trial.
pub fn outer_folds(n: usize, plan: &CvPlan, seed: Seed, trial: usize) -> Vec<usize> {
    fold_assignment(
        n,
        plan.outer_folds,
        seed.derive(STREAM_OUTER).derive(trial as u64),
    )
}

fn split(fold: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, &g) in fold.iter().enumerate() {
        if g == f {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    (train, test)
}

/// The chosen configuration and its pooled inner error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub k: usize,
    pub k_prime: Option<usize>,
    pub inner_error: f64,
}

struct InnerScores {
    knn: Vec<usize>,
    oracle: Vec<usize>,
    /// `[k_prime][k]`
    rnn: Vec<Vec<usize>>,
    total: usize,
}

fn check_method(m: Method) -> Result<()> {
    match m {
        Method::Knn | Method::Rnn | Method::RnnOracle => Ok(()),
        other => Err(HarnessError::Config(format!(
            "method {other} is not cross-validated"
        ))),
    }
}

/// Grid search for every requested method by inner cross-validation on the
/// noisy training labels. Ties go to the smallest `k`, then the smallest `k'`.
pub fn select_parameters(
    train: &Dataset,
    rates: NoiseRates,
    plan: &CvPlan,
    methods: &[Method],
    seed: Seed,
) -> Result<Vec<(Method, Selection)>> {
    let folds = fold_assignment(train.len(), plan.inner_folds, seed);
    let smallest = (0..plan.inner_folds)
        .map(|f| folds.iter().filter(|&&g| g != f).count())
        .min()
        .unwrap_or(0);
    let grid_k: Vec<usize> = plan
        .grid_k
        .iter()
        .copied()
        .filter(|&k| k >= 1 && k <= smallest)
        .collect();
    let grid_kp: Vec<usize> = plan
        .grid_k_prime
        .iter()
        .copied()
        .filter(|&kp| kp < smallest)
        .collect();
    if grid_k.is_empty() || (methods.contains(&Method::Rnn) && grid_kp.is_empty()) {
        return Err(HarnessError::Data(format!(
            "inner training folds of {smallest} examples are too small for the parameter grid"
        )));
    }
    let k_max = *grid_k.iter().max().unwrap();
    let kp_max = grid_kp.iter().copied().max().unwrap_or(0);
    let mut scores = InnerScores {
        knn: vec![0; grid_k.len()],
        oracle: vec![0; grid_k.len()],
        rnn: vec![vec![0; grid_k.len()]; grid_kp.len()],
        total: 0,
    };
    for f in 0..plan.inner_folds {
        let (fit_idx, val_idx) = split(&folds, f);
        assert!(fit_idx.iter().all(|i| folds[*i] != f) && val_idx.iter().all(|i| folds[*i] == f));
        let fit = train.subset(&fit_idx);
        let val = train.subset(&val_idx);
        let index = NeighborIndex::build(fit.clone())?;
        let votes = NeighborTable::for_queries(&index, &val, k_max, Execution::Sequential)?
            .votes(fit.labels());
        scores.total += val.len();
        let truth = val.labels();
        for (gi, &k) in grid_k.iter().enumerate() {
            if methods.contains(&Method::Knn) {
                scores.knn[gi] += mistakes((0..val.len()).map(|i| votes.knn_predict(i, k)), truth);
            }
            if methods.contains(&Method::RnnOracle) {
                let (tp, tm) = (rates.tau_plus(), rates.tau_minus());
                scores.oracle[gi] += mistakes(
                    (0..val.len()).map(|i| votes.rnn_predict(i, k, tp, tm)),
                    truth,
                );
            }
        }
        if methods.contains(&Method::Rnn) {
            let train_votes = NeighborTable::for_training(&index, kp_max, Execution::Sequential)?
                .votes(fit.labels());
            for (pi, &kp) in grid_kp.iter().enumerate() {
                let est = train_votes.noise_estimate(fit.labels(), kp, plan.quantile)?;
                let (tp, tm) = (est.tau_plus_hat(), est.tau_minus_hat());
                for (gi, &k) in grid_k.iter().enumerate() {
                    scores.rnn[pi][gi] += mistakes(
                        (0..val.len()).map(|i| votes.rnn_predict(i, k, tp, tm)),
                        truth,
                    );
                }
            }
        }
    }
    let pick = |errs: &[usize]| {
        let (gi, e) = errs
            .iter()
            .enumerate()
            .min_by_key(|&(gi, e)| (*e, gi))
            .expect("grid is non-empty");
        (grid_k[gi], *e as f64 / scores.total as f64)
    };
    let mut out = Vec::new();
    for &m in methods {
        check_method(m)?;
        let sel = match m {
            Method::Knn => {
                let (k, inner_error) = pick(&scores.knn);
                Selection {
                    k,
                    k_prime: None,
                    inner_error,
                }
            }
            Method::RnnOracle => {
                let (k, inner_error) = pick(&scores.oracle);
                Selection {
                    k,
                    k_prime: None,
                    inner_error,
                }
            }
            _ => {
                let mut best: Option<(usize, usize, usize)> = None;
                for (gi, &k) in grid_k.iter().enumerate() {
                    for (pi, &kp) in grid_kp.iter().enumerate() {
                        let e = scores.rnn[pi][gi];
                        if best.is_none_or(|(be, _, _)| e < be) {
                            best = Some((e, k, kp));
                        }
                    }
                }
                let (e, k, kp) = best.expect("grid is non-empty");
                Selection {
                    k,
                    k_prime: Some(kp),
                    inner_error: e as f64 / scores.total as f64,
                }
            }
        };
        out.push((m, sel));
    }
    Ok(out)
}

/// `outer_trials` repetitions of `outer_folds`-fold cross-validation.
///
/// In each (trial, fold) the features are scaled with training-fold ranges,
/// noise is injected into the training labels only, parameters are selected
/// by inner cross-validation on those noisy labels and the selected model is
/// scored on the held-out fold against its original labels
/// (`error_vs_clean`) and against an independent noisy copy of them
/// (`error_vs_observed`).
pub fn run_cv(
    data: &Dataset,
    rates: NoiseRates,
    plan: &CvPlan,
    methods: &[Method],
    seed: Seed,
) -> Result<Vec<ExperimentResult>> {
    for &m in methods {
        check_method(m)?;
    }
    if plan.outer_folds < 2 || plan.inner_folds < 2 || plan.outer_trials == 0 {
        return Err(HarnessError::Config(
            "need at least one trial and two folds".into(),
        ));
    }
    let tasks = plan.outer_trials * plan.outer_folds;
    let per_task = plan.execution.map_range(tasks, |t| {
        let (trial, f) = (t / plan.outer_folds, t % plan.outer_folds);
        let folds = outer_folds(data.len(), plan, seed, trial);
        run_fold(data, rates, plan, methods, seed.derive(t as u64), &folds, f)
    });
    let mut rows = Vec::new();
    for r in per_task {
        rows.extend(r?);
    }
    Ok(rows)
}

fn run_fold(
    data: &Dataset,
    rates: NoiseRates,
    plan: &CvPlan,
    methods: &[Method],
    task_seed: Seed,
    folds: &[usize],
    f: usize,
) -> Result<Vec<ExperimentResult>> {
    let (train_idx, test_idx) = split(folds, f);
    assert_eq!(train_idx.len() + test_idx.len(), data.len());
    assert!(train_idx.iter().all(|&i| folds[i] != f));
    let scaling = Scaling::fit(&data.subset(&train_idx));
    let train = scaling.apply(&data.subset(&train_idx))?;
    let test = scaling.apply(&data.subset(&test_idx))?;

    let noise = task_seed.derive(STREAM_NOISE);
    let noisy_labels = flip_labels(train.labels(), rates, noise.derive(0));
    let observed_test = flip_labels(test.labels(), rates, noise.derive(1));
    let noisy = train.with_labels(noisy_labels)?;

    let start = Instant::now();
    let selected = select_parameters(&noisy, rates, plan, methods, task_seed.derive(STREAM_INNER))?;
    let index = NeighborIndex::build(noisy.clone())?;
    let k_max = selected.iter().map(|(_, s)| s.k).max().unwrap_or(1);
    let votes = NeighborTable::for_queries(&index, &test, k_max, Execution::Sequential)?
        .votes(noisy.labels());
    let kp_max = selected.iter().filter_map(|(_, s)| s.k_prime).max();
    let train_votes = match kp_max {
        Some(w) => Some(
            NeighborTable::for_training(&index, w, Execution::Sequential)?.votes(noisy.labels()),
        ),
        None => None,
    };
    let shared = start.elapsed().as_secs_f64();

    let mut rows = Vec::new();
    for (method, sel) in selected {
        let t0 = Instant::now();
        let (preds, tau_hat): (Vec<Label>, Option<(f64, f64)>) = match method {
            Method::Knn => (
                (0..test.len())
                    .map(|i| votes.knn_predict(i, sel.k))
                    .collect(),
                None,
            ),
            Method::RnnOracle => {
                let (tp, tm) = (rates.tau_plus(), rates.tau_minus());
                (
                    (0..test.len())
                        .map(|i| votes.rnn_predict(i, sel.k, tp, tm))
                        .collect(),
                    Some((tp, tm)),
                )
            }
            _ => {
                let kp = sel.k_prime.expect("rnn selection has k'");
                let est = train_votes
                    .as_ref()
                    .expect("training votes computed")
                    .noise_estimate(noisy.labels(), kp, plan.quantile)?;
                let (tp, tm) = (est.tau_plus_hat(), est.tau_minus_hat());
                (
                    (0..test.len())
                        .map(|i| votes.rnn_predict(i, sel.k, tp, tm))
                        .collect(),
                    Some((tp, tm)),
                )
            }
        };
        let n_test = test.len() as f64;
        rows.push(ExperimentResult {
            experiment_id: "cv".into(),
            seed: task_seed.value(),
            method,
            k: Some(sel.k),
            k_prime: sel.k_prime,
            n: train.len(),
            rates,
            tau_hat,
            error_vs_clean: Some(mistakes(preds.iter().copied(), test.labels()) as f64 / n_test),
            error_vs_observed: Some(
                mistakes(preds.iter().copied(), &observed_test) as f64 / n_test,
            ),
            runtime_s: plan
                .record_runtime
                .then(|| shared + t0.elapsed().as_secs_f64()),
        });
    }
    Ok(rows)
}
