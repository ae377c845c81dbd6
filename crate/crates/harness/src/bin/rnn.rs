use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{error::ErrorKind, Args, Parser, Subcommand};

use robust_knn::rnn::{estimate_noise_with, EstimateOptions, NoiseEstimate};
use robust_knn::{inject_noise, Execution, KnnModel, NeighborIndex, NoiseRates, RnnModel, Seed};
use robust_knn_harness::experiments::{self, SweepParam};
use robust_knn_harness::io::write_dataset_csv;
use robust_knn_harness::results::{format_sig6, summarize, write_results, write_summary, Grouping};
use robust_knn_harness::{
    load_binary, load_dataset, run_cv, CvPlan, DataFormat, ExperimentConfig, ExperimentOutput,
    ExperimentResult, HarnessError, Method, Result, Scaling,
};

#[derive(Parser)]
#[command(
    name = "rnn",
    version,
    about = "Robust k-nearest neighbors under asymmetric label noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit on a training file and predict the points of a test file
    Predict(PredictArgs),
    /// Print the estimated flip rates of a dataset
    EstimateNoise(EstimateArgs),
    /// Write a copy of a dataset with flipped labels
    InjectNoise(InjectArgs),
    /// Repeated k-fold cross-validation with inner grid search
    Cv(CvArgs),
    /// k-NN and RNN error across k under asymmetric noise (synthetic)
    Fig1a(ExperimentArgs),
    /// k-NN error across k under symmetric noise (synthetic)
    Fig1b(ExperimentArgs),
    /// 1-NN error across training sizes under symmetric noise (synthetic)
    Fig1c(ExperimentArgs),
    /// RNN error as one parameter varies
    Sweep(SweepArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "csv")]
    format: DataFormat,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; results go to stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run on one thread
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Points to classify, in the training file's format
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 50)]
    k_prime: usize,
    /// knn, rnn or rnn-oracle (uses --tau-plus/--tau-minus as the rates)
    #[arg(long, default_value = "rnn")]
    method: String,
    #[arg(long)]
    tau_plus: Option<f64>,
    #[arg(long)]
    tau_minus: Option<f64>,
    /// Min-max scale features to [-1, 1] using the training ranges
    #[arg(long)]
    scale: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 50)]
    k_prime: usize,
    /// Flip labels with these rates before estimating
    #[arg(long)]
    tau_plus: Option<f64>,
    #[arg(long)]
    tau_minus: Option<f64>,
    /// Lower order statistic used in place of the minimum
    #[arg(long, default_value_t = 0.0)]
    quantile: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct InjectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.0)]
    tau_plus: f64,
    #[arg(long, default_value_t = 0.0)]
    tau_minus: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.0)]
    tau_plus: f64,
    #[arg(long, default_value_t = 0.0)]
    tau_minus: f64,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 4)]
    folds: usize,
    #[arg(long, default_value_t = 4)]
    inner_folds: usize,
    /// Comma-separated subset of knn,rnn,rnn_oracle
    #[arg(long, default_value = "knn,rnn,rnn_oracle")]
    method: String,
    /// Values of k: `5,10,20` or `start:step:end`
    #[arg(long, value_parser = parse_grid)]
    grid_k: Option<Grid>,
    #[arg(long, value_parser = parse_grid)]
    grid_k_prime: Option<Grid>,
    #[arg(long, default_value_t = 0.0)]
    quantile: f64,
    /// Fill the runtime_s column (makes output run-dependent)
    #[arg(long)]
    record_runtime: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    tau_plus: Option<f64>,
    #[arg(long)]
    tau_minus: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Fixed k where k is not swept
    #[arg(long)]
    k: Option<usize>,
    /// Fixed k' where k' is not swept
    #[arg(long)]
    k_prime: Option<usize>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long, value_parser = parse_grid)]
    grid_k: Option<Grid>,
    #[arg(long, value_parser = parse_grid)]
    grid_k_prime: Option<Grid>,
    #[arg(long, value_parser = parse_grid)]
    grid_n: Option<Grid>,
    #[arg(long)]
    quantile: Option<f64>,
    /// Target standard error of Monte-Carlo reference values
    #[arg(long)]
    mc_precision: Option<f64>,
    #[arg(long)]
    record_runtime: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    /// Swept parameter: k, k-prime or n
    #[arg(value_parser = parse_sweep)]
    param: SweepParam,
    /// Benchmark dataset; the synthetic model is used when absent
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: DataFormat,
    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(Debug, Clone)]
struct Grid(Vec<usize>);

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("`{t}` is not a non-negative integer"))
    };
    let values = match parts.as_slice() {
        [start, step, end] => {
            let (start, step, end) = (num(start)?, num(step)?, num(end)?);
            if step == 0 {
                return Err("step must be positive".into());
            }
            (start..=end).step_by(step).collect()
        }
        [_] => s
            .split(',')
            .map(num)
            .collect::<std::result::Result<Vec<_>, _>>()?,
        _ => return Err(format!("`{s}` is neither a list nor start:step:end")),
    };
    if values.is_empty() {
        return Err("grid is empty".into());
    }
    Ok(Grid(values))
}

fn parse_sweep(s: &str) -> std::result::Result<SweepParam, String> {
    SweepParam::parse(s)
        .ok_or_else(|| format!("unknown sweep parameter `{s}` (expected k, k-prime or n)"))
}

fn rates(tau_plus: f64, tau_minus: f64) -> Result<NoiseRates> {
    NoiseRates::new(tau_plus, tau_minus).map_err(|e| HarnessError::Config(e.to_string()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.csv")
}

fn emit(out: Option<&Path>, result: ExperimentOutput, grouping: Grouping) -> Result<()> {
    write_results(output(out)?, &result.rows)?;
    if let Some(p) = out {
        let summary = summarize(&result.rows, &result.references, grouping);
        write_summary(create(&summary_path(p))?, &summary)?;
    }
    Ok(())
}

fn io_error(path: &str) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.into(),
        source,
    }
}

fn predict(a: PredictArgs) -> Result<()> {
    let exec = a.common.execution();
    let (mut train, grouping, _) = load_binary(&a.data.data, a.data.format, Seed(a.common.seed))?;
    let mut test = grouping.apply(&load_dataset(&a.test, a.data.format)?)?;
    if a.scale {
        let s = Scaling::fit(&train);
        train = s.apply(&train)?;
        test = s.apply(&test)?;
    }
    let index = NeighborIndex::build(Arc::new(train))?;
    let estimate = match Method::parse(&a.method) {
        Some(Method::Knn) => None,
        Some(Method::Rnn) => {
            let opts = EstimateOptions {
                quantile: 0.0,
                execution: exec,
            };
            Some(estimate_noise_with(&index, a.k_prime, opts)?)
        }
        Some(Method::RnnOracle) => Some(NoiseEstimate::from_rates(rates(
            a.tau_plus.unwrap_or(0.0),
            a.tau_minus.unwrap_or(0.0),
        )?)),
        _ => {
            return Err(HarnessError::Config(format!(
                "unknown method `{}`",
                a.method
            )))
        }
    };
    let knn = KnnModel::new(index.clone(), a.k)?;
    let rnn = match &estimate {
        Some(e) => Some(RnnModel::with_estimate(index, a.k, a.k_prime, e.clone())?),
        None => None,
    };
    let predictions = exec.map_range(test.len(), |i| {
        let q = test.point(i);
        let eta = knn.eta_hat_query(q)?;
        let y = match &rnn {
            Some(m) => m.predict(q)?,
            None => knn.predict(q)?,
        };
        Ok((eta, y))
    });
    let predictions = predictions
        .into_iter()
        .collect::<robust_knn::Result<Vec<_>>>()?;

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(output(a.common.out.as_deref())?);
    w.write_record(["index", "label", "eta_hat", "prediction"])?;
    let mut wrong = 0;
    for (i, (eta, y)) in predictions.iter().enumerate() {
        wrong += usize::from(*y != test.label(i));
        w.write_record([
            i.to_string(),
            test.label(i).as_u8().to_string(),
            format_sig6(*eta),
            y.as_u8().to_string(),
        ])?;
    }
    w.flush().map_err(io_error("<output>"))?;
    if let Some(e) = &estimate {
        eprintln!(
            "tau_plus_hat={} tau_minus_hat={}",
            format_sig6(e.tau_plus_hat()),
            format_sig6(e.tau_minus_hat())
        );
    }
    eprintln!(
        "error={}",
        format_sig6(wrong as f64 / test.len().max(1) as f64)
    );
    Ok(())
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let seed = Seed(a.common.seed);
    let (data, _, _) = load_binary(&a.data.data, a.data.format, seed)?;
    let injected = if a.tau_plus.is_some() || a.tau_minus.is_some() {
        rates(a.tau_plus.unwrap_or(0.0), a.tau_minus.unwrap_or(0.0))?
    } else {
        NoiseRates::none()
    };
    let data = inject_noise(&data, injected, seed)?.into_data();
    let n = data.len();
    let index = NeighborIndex::build(data)?;
    let opts = EstimateOptions {
        quantile: a.quantile,
        execution: a.common.execution(),
    };
    if !(0.0..0.5).contains(&a.quantile) {
        return Err(HarnessError::Config(format!(
            "quantile {} outside [0, 0.5)",
            a.quantile
        )));
    }
    let est = estimate_noise_with(&index, a.k_prime, opts)?;
    let (tp, tm) = (est.tau_plus_hat(), est.tau_minus_hat());
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "tau_plus_hat={}", format_sig6(tp)).map_err(io_error("<stdout>"))?;
    writeln!(stdout, "tau_minus_hat={}", format_sig6(tm)).map_err(io_error("<stdout>"))?;
    if let Some(out) = a.common.out.as_deref() {
        let row = ExperimentResult {
            experiment_id: "estimate_noise".into(),
            seed: seed.value(),
            method: Method::Rnn,
            k: None,
            k_prime: Some(a.k_prime),
            n,
            rates: injected,
            tau_hat: Some((tp, tm)),
            error_vs_clean: None,
            error_vs_observed: None,
            runtime_s: None,
        };
        write_results(create(out)?, &[row])?;
    }
    Ok(())
}

fn inject(a: InjectArgs) -> Result<()> {
    let seed = Seed(a.common.seed);
    let (data, _, raw) = load_binary(&a.data.data, a.data.format, seed)?;
    let noisy = inject_noise(&data, rates(a.tau_plus, a.tau_minus)?, seed)?;
    let clean: Vec<u8> = noisy.true_labels().iter().map(|l| l.as_u8()).collect();
    write_dataset_csv(
        output(a.common.out.as_deref())?,
        noisy.data(),
        &raw.feature_names,
        &[("clean_label", clean)],
    )?;
    log::info!("flipped {} of {} labels", noisy.flipped_count(), data.len());
    Ok(())
}

fn cv(a: CvArgs) -> Result<()> {
    let seed = Seed(a.common.seed);
    let (data, _, _) = load_binary(&a.data.data, a.data.format, seed)?;
    let methods = a
        .method
        .split(',')
        .map(|m| {
            Method::parse(m.trim())
                .ok_or_else(|| HarnessError::Config(format!("unknown method `{m}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let defaults = CvPlan::default();
    let plan = CvPlan {
        outer_trials: a.trials,
        outer_folds: a.folds,
        inner_folds: a.inner_folds,
        grid_k: a.grid_k.map_or(defaults.grid_k, |g| g.0),
        grid_k_prime: a.grid_k_prime.map_or(defaults.grid_k_prime, |g| g.0),
        quantile: a.quantile,
        execution: a.common.execution(),
        record_runtime: a.record_runtime,
    };
    let mut rows = run_cv(
        &data,
        rates(a.tau_plus, a.tau_minus)?,
        &plan,
        &methods,
        seed,
    )?;
    robust_knn_harness::results::sort_results(&mut rows);
    emit(
        a.common.out.as_deref(),
        ExperimentOutput {
            rows,
            references: Vec::new(),
        },
        Grouping::ByMethod,
    )
}

/// Applies command-line overrides; a single rate given to a symmetric
/// experiment is used for both classes.
fn configure(
    mut cfg: ExperimentConfig,
    a: &ExperimentArgs,
    symmetric: bool,
) -> Result<ExperimentConfig> {
    let (tp, tm) = match (a.tau_plus, a.tau_minus) {
        (Some(p), None) if symmetric => (p, p),
        (None, Some(m)) if symmetric => (m, m),
        (p, m) => (
            p.unwrap_or(cfg.rates.tau_plus()),
            m.unwrap_or(cfg.rates.tau_minus()),
        ),
    };
    cfg.rates = rates(tp, tm)?;
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(k) = a.k_prime {
        cfg.k_prime = k;
    }
    if let Some(n) = a.n_train {
        cfg.n_train = n;
    }
    if let Some(n) = a.n_test {
        cfg.n_test = n;
    }
    if let Some(g) = &a.grid_k {
        cfg.grid_k = g.0.clone();
    }
    if let Some(g) = &a.grid_k_prime {
        cfg.grid_k_prime = g.0.clone();
    }
    if let Some(g) = &a.grid_n {
        cfg.grid_n = g.0.clone();
    }
    if let Some(q) = a.quantile {
        if !(0.0..0.5).contains(&q) {
            return Err(HarnessError::Config(format!(
                "quantile {q} outside [0, 0.5)"
            )));
        }
        cfg.quantile = q;
    }
    if let Some(p) = a.mc_precision {
        if p.is_nan() || p <= 0.0 {
            return Err(HarnessError::Config("mc precision must be positive".into()));
        }
        cfg.mc_precision = p;
    }
    if cfg.n_test == 0 || cfg.trials == 0 {
        return Err(HarnessError::Config(
            "need at least one trial and one test point".into(),
        ));
    }
    cfg.execution = a.common.execution();
    cfg.record_runtime = a.record_runtime;
    Ok(cfg)
}

fn figure(a: ExperimentArgs, which: &str) -> Result<()> {
    let seed = Seed(a.common.seed);
    let result = match which {
        "fig1a" => experiments::run_fig1a(&configure(ExperimentConfig::fig1a(), &a, false)?, seed)?,
        "fig1b" => experiments::run_fig1b(&configure(ExperimentConfig::fig1b(), &a, true)?, seed)?,
        _ => experiments::run_fig1c(&configure(ExperimentConfig::fig1c(), &a, true)?, seed)?,
    };
    emit(a.common.out.as_deref(), result, Grouping::ByConfiguration)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let seed = Seed(a.exp.common.seed);
    let cfg = configure(ExperimentConfig::sweep(), &a.exp, false)?;
    let benchmark = match &a.data {
        Some(p) => Some(load_binary(p, a.format, seed)?.0),
        None => None,
    };
    let result = experiments::run_param_sweep(a.param, &cfg, benchmark.as_ref(), seed)?;
    emit(
        a.exp.common.out.as_deref(),
        result,
        Grouping::ByConfiguration,
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Predict(a) => predict(a),
        Command::EstimateNoise(a) => estimate(a),
        Command::InjectNoise(a) => inject(a),
        Command::Cv(a) => cv(a),
        Command::Fig1a(a) => figure(a, "fig1a"),
        Command::Fig1b(a) => figure(a, "fig1b"),
        Command::Fig1c(a) => figure(a, "fig1c"),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}
