//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use robust_knn::rnn::{estimate_noise, unilateral_correction, NoiseEstimate};
use robust_knn::theory::{
    bayes_error, noise_free_knn_risk_bound, one_nn_risk_band, symmetric_knn_risk_bound,
    synthetic_bayes_error, BoundInputs, ConditionalModel, MonteCarlo,
};
use robust_knn::{
    brute_force_knn, inject_noise, Dataset, KnnModel, Label, NeighborIndex, NoiseRates, RnnModel,
    Seed,
};
use robust_knn_harness::experiments::{
    run_fig1a, run_fig1b, run_fig1c, synthetic_split, ExperimentConfig,
};
use robust_knn_harness::results::{ExperimentResult, Stats};
use robust_knn_harness::Method;

/// Pr[A_0] for the synthetic model at rates (0.1, 0.3), from the quadrature oracle.
const A0_SYNTHETIC_01_03: f64 = 0.236_571_310_245_660_4;
const BASE_SEED: Seed = Seed(20_240_601);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, start: Instant, mut o: Outcome) -> Outcome {
    let t = start.elapsed();
    o.detail = format!(
        "{} [{:.1}s, limit {}s]",
        o.detail,
        t.as_secs_f64(),
        limit.as_secs()
    );
    if t >= limit {
        o.pass = false;
    }
    o
}

/// Per-seed errors keyed by k, in trial order.
fn errors_by_k(rows: &[ExperimentResult], method: Method) -> BTreeMap<usize, Vec<f64>> {
    let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.method == method) {
        out.entry(r.k.expect("grid rows carry k"))
            .or_default()
            .push(r.test_error());
    }
    out
}

fn best(curve: &BTreeMap<usize, Vec<f64>>) -> (usize, f64) {
    curve
        .iter()
        .map(|(&k, v)| (k, Stats::of(v).mean))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("non-empty curve")
}

/// Coordinates on a coarse lattice produce many exact distance ties.
fn coord<R: Rng>(rng: &mut R, grid: bool) -> f64 {
    if grid {
        rng.gen_range(0..4) as f64 * 0.5
    } else {
        rng.gen::<f64>() * 2.0 - 1.0
    }
}

fn index_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = BASE_SEED.derive(1).rng();
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=500);
        let d = rng.gen_range(1..=10);
        let grid = rng.gen_bool(0.3);
        let features: Vec<f64> = (0..n * d).map(|_| coord(&mut rng, grid)).collect();
        let labels = (0..n).map(|_| Label::from_bool(rng.gen())).collect();
        let data = Dataset::from_flat(d, features, labels).unwrap();
        let index = NeighborIndex::build(data.clone()).unwrap();
        let q: Vec<f64> = (0..d).map(|_| coord(&mut rng, grid)).collect();
        let k = rng.gen_range(1..=n);
        let fast: Vec<usize> = index.query_knn(&q, k).unwrap().indices().collect();
        let slow: Vec<usize> = brute_force_knn(&data, &q, k).unwrap().indices().collect();
        mismatches += usize::from(fast != slow);
    }
    within(
        Duration::from_secs(10),
        start,
        outcome(
            mismatches == 0,
            format!("{mismatches} mismatching triples of 1000"),
        ),
    )
}

fn bayes_fixture() -> Outcome {
    let start = Instant::now();
    let mc = MonteCarlo::new(1.0, BASE_SEED.derive(2)).with_min_samples(10_000_000);
    let est = bayes_error(&ConditionalModel::synthetic(), &mc).unwrap();
    let exact = synthetic_bayes_error();
    let z = (est.value - exact).abs() / est.std_error;
    within(
        Duration::from_secs(30),
        start,
        outcome(
            est.samples >= 10_000_000 && z < 3.0,
            format!(
                "estimate {:.6} (se {:.2e}, {} samples) vs {exact:.6}: {z:.2} se",
                est.value, est.std_error, est.samples
            ),
        ),
    )
}

fn symmetric_consistency() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig::fig1b();
    let out = run_fig1b(&cfg, BASE_SEED.derive(3)).unwrap();
    let noisy = errors_by_k(&out.rows, Method::Knn);
    let clean = errors_by_k(&out.rows, Method::KnnNoiseFree);
    let (k, err) = best(&noisy);
    let clean_at_k = Stats::of(&clean[&k]).mean;
    let r_star = synthetic_bayes_error();
    let pass = (err - r_star).abs() <= 0.03 && (err - clean_at_k).abs() <= 0.02;
    within(
        Duration::from_secs(300),
        start,
        outcome(
            pass,
            format!(
                "best k={k}: mean error {err:.4}, |err - R*| = {:.4}, noise-free at k {clean_at_k:.4}, gap {:.4}",
                (err - r_star).abs(),
                (err - clean_at_k).abs()
            ),
        ),
    )
}

fn asymmetric_bias() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig::fig1a();
    let out = run_fig1a(&cfg, BASE_SEED.derive(4)).unwrap();
    let knn = errors_by_k(&out.rows, Method::Knn);
    let rnn = errors_by_k(&out.rows, Method::Rnn);
    let r_star = synthetic_bayes_error();
    let threshold = 0.5 * A0_SYNTHETIC_01_03;
    let excess: Vec<(usize, f64)> = knn
        .iter()
        .map(|(&k, v)| (k, Stats::of(v).mean - r_star))
        .collect();
    let (k_low, low) = excess
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let below = excess.iter().filter(|(_, e)| *e <= threshold).count();
    let bias_ok = below == 0;

    let (kk, knn_best) = best(&knn);
    let (kr, rnn_best) = best(&rnn);
    let diffs: Vec<f64> = knn[&kk].iter().zip(&rnn[&kr]).map(|(a, b)| a - b).collect();
    let paired = Stats::of(&diffs);
    let gain_ok = paired.mean > 2.0 * paired.stderr;
    println!(
        "    4a: k-NN excess over R* vs 0.5*Pr[A0] = {threshold:.4}: smallest {low:.4} at k={k_low}; \
         {below} of {} grid points at or below -> {}",
        excess.len(),
        if bias_ok { "PASS" } else { "FAIL" }
    );
    println!(
        "    4b: best k-NN {knn_best:.4} (k={kk}) - best RNN {rnn_best:.4} (k={kr}) = {:.4}, paired se {:.4} -> {}",
        paired.mean,
        paired.stderr,
        if gain_ok { "PASS" } else { "FAIL" }
    );
    within(
        Duration::from_secs(600),
        start,
        outcome(
            bias_ok && gain_ok,
            format!("bias clause {}, RNN gain clause {}", bias_ok, gain_ok),
        ),
    )
}

fn one_nn_band() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        grid_n: vec![64_000],
        ..ExperimentConfig::fig1c()
    };
    let out = run_fig1c(&cfg, BASE_SEED.derive(5)).unwrap();
    let errors: Vec<f64> = out.rows.iter().map(|r| r.test_error()).collect();
    let s = Stats::of(&errors);
    let r_star = synthetic_bayes_error();
    let (lo, hi) =
        one_nn_risk_band(0.2, r_star, std::f64::consts::PI * 2f64.sqrt(), 2, 64_000).unwrap();
    let in_band = s.mean >= lo - 2.0 * s.stderr && s.mean <= hi + 2.0 * s.stderr;
    let gap = s.mean > r_star + 0.05;
    within(
        Duration::from_secs(600),
        start,
        outcome(
            errors.len() == 40 && in_band && gap,
            format!(
                "mean 1-NN error {:.4} (se {:.4}) in [{lo:.4}, {hi:.4}]: {in_band}; above R* + 0.05 = {:.4}: {gap}",
                s.mean,
                s.stderr,
                r_star + 0.05
            ),
        ),
    )
}

fn sign_fidelity() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (tp, tm) in [(0.1, 0.2), (0.3, 0.1)] {
        let rates = NoiseRates::new(tp, tm).unwrap();
        let mut hits = 0;
        for s in 0..40u64 {
            let seed = BASE_SEED.derive(6).derive(s);
            let (train, _) = synthetic_split(4000, 0, seed);
            let noisy = inject_noise(&train, rates, seed.derive(1)).unwrap();
            let index = NeighborIndex::build(noisy.into_data()).unwrap();
            let e = estimate_noise(&index, 50).unwrap();
            let want = (tp - tm).signum();
            hits += usize::from((e.tau_plus_hat() - e.tau_minus_hat()).signum() == want);
        }
        pass &= hits * 10 >= 40 * 9;
        parts.push(format!("({tp}, {tm}): {hits}/40"));
    }
    within(
        Duration::from_secs(120),
        start,
        outcome(pass, parts.join(", ")),
    )
}

fn algorithm_invariants() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();

    // (a) equal estimates reduce RNN to k-NN
    let mut rng = BASE_SEED.derive(7).rng();
    let features: Vec<f64> = (0..2000 * 2).map(|_| rng.gen()).collect();
    let labels = (0..2000)
        .map(|_| Label::from_bool(rng.gen_bool(0.4)))
        .collect();
    let index = NeighborIndex::build(Dataset::from_flat(2, features, labels).unwrap()).unwrap();
    let queries: Vec<[f64; 2]> = (0..10_000).map(|_| [rng.gen(), rng.gen()]).collect();
    let mut reduction = 0;
    for (k, tau) in [(1, 0.0), (8, 0.2), (25, 0.35)] {
        let est = NoiseEstimate::from_rates(NoiseRates::symmetric(tau).unwrap());
        let rnn = RnnModel::with_estimate(index.clone(), k, 10, est).unwrap();
        let knn = KnnModel::new(index.clone(), k).unwrap();
        reduction += queries
            .iter()
            .filter(|q| rnn.predict(&q[..]).unwrap() != knn.predict(&q[..]).unwrap())
            .count();
        // (d) threshold equivalence
        for q in &queries {
            if knn.predict(q).unwrap().is_positive() != (knn.eta_hat_query(q).unwrap() >= 0.5) {
                failures.push("threshold");
                break;
            }
        }
    }
    if reduction > 0 {
        failures.push("reduction");
    }

    // (b) unilaterality and (c) common-shift invariance on dyadic grids
    let dy = |i: u32| i as f64 / 64.0;
    let (mut unilateral_bad, mut shift_bad) = (0, 0);
    for k in 1u32..=64 {
        for j in 0..=k {
            let e = j as f64 / k as f64;
            let base = Label::from_bool(e >= 0.5);
            for tp in 0..32 {
                for tm in 0..32 {
                    let (p, m) = (dy(tp), dy(tm));
                    let y = unilateral_correction(e, p, m);
                    let ok = if y == base {
                        true
                    } else if m > p {
                        base == Label::Positive && e > 0.5 && 2.0 * e - 1.0 < m - p
                    } else {
                        p > m && base == Label::Negative && e < 0.5 && 2.0 * e - 1.0 > m - p
                    };
                    unilateral_bad += usize::from(!ok);
                    if unilateral_correction(e, dy(tp + 16), dy(tm + 16)) != y {
                        shift_bad += 1;
                    }
                }
            }
        }
    }
    if unilateral_bad > 0 {
        failures.push("unilaterality");
    }
    if shift_bad > 0 {
        failures.push("shift invariance");
    }

    // (e) symmetric bound at zero noise is the noise-free bound
    let l = std::f64::consts::PI * 2f64.sqrt();
    for (k, n, d) in [(8, 100, 1), (64, 4000, 2), (100, 100_000, 5)] {
        let inputs = BoundInputs {
            k,
            n,
            d,
            lipschitz: l,
            rates: NoiseRates::none(),
        };
        let r = synthetic_bayes_error();
        if symmetric_knn_risk_bound(&inputs, r).unwrap()
            != noise_free_knn_risk_bound(k, n, d, l, r).unwrap()
        {
            failures.push("zero-noise bound");
            break;
        }
    }
    let detail = if failures.is_empty() {
        "reduction on 3x10^4 queries, unilaterality and shift on 2.1M dyadic cases, threshold, zero-noise bound".into()
    } else {
        format!("violated: {}", failures.join(", "))
    };
    within(
        Duration::from_secs(60),
        start,
        outcome(failures.is_empty(), detail),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> (bool, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_rnn"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    (out.status.success(), out.stdout)
}

fn reproducibility() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = synthetic_split(600, 200, BASE_SEED.derive(8));
    for (name, d) in [("train.csv", &train), ("test.csv", &test)] {
        let f = std::fs::File::create(dir.path().join(name)).unwrap();
        robust_knn_harness::io::write_dataset_csv(f, d, &[], &[]).unwrap();
    }
    let quick = ["--trials", "5", "--mc-precision", "0.005"];
    let runs: Vec<(&str, Vec<&str>)> = vec![
        (
            "predict",
            vec![
                "predict",
                "--data",
                "train.csv",
                "--test",
                "test.csv",
                "--k",
                "15",
            ],
        ),
        (
            "estimate-noise",
            vec![
                "estimate-noise",
                "--data",
                "train.csv",
                "--tau-plus",
                "0.1",
                "--tau-minus",
                "0.3",
            ],
        ),
        (
            "inject-noise",
            vec![
                "inject-noise",
                "--data",
                "train.csv",
                "--tau-plus",
                "0.2",
                "--tau-minus",
                "0.1",
            ],
        ),
        (
            "cv",
            vec![
                "cv",
                "--data",
                "train.csv",
                "--tau-plus",
                "0.1",
                "--tau-minus",
                "0.2",
                "--trials",
                "2",
                "--grid-k",
                "5:10:45",
                "--grid-k-prime",
                "10,30",
            ],
        ),
        ("fig1a", [&["fig1a"][..], &quick].concat()),
        ("fig1b", [&["fig1b"][..], &quick].concat()),
        (
            "fig1c",
            [&["fig1c", "--grid-n", "500,2000,8000"][..], &quick].concat(),
        ),
        ("sweep k", [&["sweep", "k"][..], &quick].concat()),
        (
            "sweep k-prime",
            [&["sweep", "k-prime"][..], &quick].concat(),
        ),
        ("sweep n", [&["sweep", "n"][..], &quick].concat()),
    ];
    let mut bad = Vec::new();
    for (i, (name, args)) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = format!("run{i}_{rep}.csv");
            let mut full: Vec<&str> = args.clone();
            full.extend(["--seed", "7", "--out", &out]);
            let (ok, stdout) = run_cli(dir.path(), &full);
            let file = std::fs::read(dir.path().join(&out)).unwrap_or_default();
            let summary = std::fs::read(dir.path().join(format!("run{i}_{rep}.summary.csv")))
                .unwrap_or_default();
            outputs.push((ok, stdout, file, summary));
        }
        let (a, b) = (&outputs[0], &outputs[1]);
        if !(a.0 && b.0 && !a.2.is_empty() && a == b) {
            bad.push(*name);
        }
    }
    within(
        Duration::from_secs(600),
        start,
        outcome(
            bad.is_empty(),
            if bad.is_empty() {
                format!(
                    "{} subcommand invocations byte-identical across reruns",
                    runs.len()
                )
            } else {
                format!("differing or failing: {}", bad.join(", "))
            },
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("index correctness oracle", index_oracle),
        ("Bayes error fixture", bayes_fixture),
        ("symmetric-noise consistency", symmetric_consistency),
        ("asymmetric-noise bias", asymmetric_bias),
        ("1-NN inconsistency band", one_nn_band),
        ("noise-estimate sign fidelity", sign_fidelity),
        ("algorithm invariants", algorithm_invariants),
        ("CLI reproducibility", reproducibility),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!(
            "criterion {} {}: {} ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail
        );
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", criteria.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
