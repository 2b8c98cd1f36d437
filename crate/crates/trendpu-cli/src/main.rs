//! Command-line driver for the trend-based PU learning pipeline.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage/input errors,
//! 3 degenerate partition, 4 numeric abort.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use config::{parse_estimator, parse_hidden_dims, parse_snapshot_interval, parse_stopping, FileConfig};
use trendpu::data::{
    gen_two_gaussians, load_csv, make_pu_split, random_unit_vector, save_csv, GaussianConfig,
    PUDataset,
};
use trendpu::io::{read_score_csv, read_trace_csv, write_score_csv, write_trace_csv};
use trendpu::jenks::partition_by_trend;
use trendpu::model::{predict_scores, save_params};
use trendpu::pipeline::{
    estimate_prior, evaluate_scores, retrain, run_pipeline, train_and_trace, Metrics,
    PipelineConfig, PipelineSeeds,
};
use trendpu::rng::derive_seed;
use trendpu::theory::{concentration_experiment, ConcentrationConfig};
use trendpu::tpp_stats::{mk_test, score_all, ScoreTrace, TrendDirection, TrendScoreParams};
use trendpu::verify::{
    verify_concentration, verify_gradients, verify_hyperplane, verify_jenks, CheckOutcome,
};
use trendpu::{Error, Result};

#[derive(Parser)]
#[command(
    name = "trendpu",
    version,
    about = "Trend-based positive-unlabeled learning: resampled PU training, \
             score-trace trend statistics, natural-break pseudo-labeling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-Gaussian PU dataset as CSV
    GenData(GenDataArgs),
    /// Train with balanced resampling and record score traces
    Train(TrainArgs),
    /// Compute trend scores from a trace file
    ScoreTrends(ScoreTrendsArgs),
    /// Run the Mann-Kendall test on every trace
    MkTest(MkTestArgs),
    /// Split trend scores at the Fisher natural break
    Partition(PartitionArgs),
    /// Retrain a fresh model on pseudo-labels
    Retrain(RetrainArgs),
    /// Run the full pipeline end to end
    Pipeline(PipelineArgs),
    /// Run verification suites (oracle equivalence, gradients, theory)
    Verify(VerifyArgs),
    /// Emit plot-ready per-class trace summaries
    TraceSummary(TraceSummaryArgs),
}

/// Flags shared by the training-flavored subcommands. Every value can also
/// come from `--config`; explicit flags win.
#[derive(Args, Debug, Clone)]
struct TrainingFlags {
    /// Key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; per-purpose seeds are derived from it
    #[arg(long)]
    seed: Option<u64>,
    /// Balanced batch size B
    #[arg(long)]
    batch_size: Option<usize>,
    /// Optimizer steps per snapshot, or "auto" for one pass over the
    /// unlabeled set
    #[arg(long)]
    snapshot_interval: Option<String>,
    /// Number of snapshots to record
    #[arg(long)]
    max_snapshots: Option<usize>,
    /// Scaling parameter of the influence function
    #[arg(long)]
    alpha: Option<f64>,
    /// Trend estimator: mean, full or simplified
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Hidden layer widths, comma separated; empty for logistic regression
    #[arg(long)]
    hidden_dims: Option<String>,
    /// Stop-snapshot selection: fixed or mixup
    #[arg(long)]
    stopping: Option<String>,
    #[arg(long)]
    retrain_epochs: Option<usize>,
    /// Significance level for Mann-Kendall diagnostics
    #[arg(long)]
    significance: Option<f64>,
}

impl TrainingFlags {
    fn file(&self) -> Result<FileConfig> {
        match &self.config {
            Some(path) => FileConfig::load(path),
            None => Ok(FileConfig::default()),
        }
    }

    /// Merge flags over file values over defaults.
    fn resolve(&self) -> Result<(PipelineConfig, u64)> {
        let file = self.file()?;
        let seed = self.seed.or(file.seed).unwrap_or(0);
        let mut config = PipelineConfig::new(seed);
        config.seeds = PipelineSeeds::from_master(seed);
        if let Some(b) = self.batch_size.or(file.batch_size) {
            config.batch_size = b;
        }
        if let Some(text) = &self.snapshot_interval {
            config.snapshot_interval = parse_snapshot_interval(text)?;
        } else if let Some(interval) = file.snapshot_interval {
            config.snapshot_interval = interval;
        }
        if let Some(t) = self.max_snapshots.or(file.max_snapshots) {
            config.max_snapshots = t;
        }
        if let Some(alpha) = self.alpha.or(file.alpha) {
            config.trend.alpha = alpha;
        }
        if let Some(text) = &self.estimator {
            config.trend.estimator = parse_estimator(text)?;
        } else if let Some(estimator) = file.estimator {
            config.trend.estimator = estimator;
        }
        if let Some(lr) = self.learning_rate.or(file.learning_rate) {
            config.learning_rate = lr;
        }
        if let Some(text) = &self.hidden_dims {
            config.hidden_dims = parse_hidden_dims(text)?;
        } else if let Some(dims) = file.hidden_dims {
            config.hidden_dims = dims;
        }
        if let Some(text) = &self.stopping {
            config.stopping = parse_stopping(text)?;
        } else if let Some(stopping) = file.stopping {
            config.stopping = stopping;
        }
        if let Some(epochs) = self.retrain_epochs.or(file.retrain_epochs) {
            config.retrain_epochs = epochs;
        }
        if let Some(level) = self.significance.or(file.significance) {
            config.significance_level = level;
        }
        config.validate()?;
        Ok((config, seed))
    }
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Total sample count
    #[arg(long)]
    n: Option<usize>,
    /// Positive class prior
    #[arg(long)]
    pi: Option<f64>,
    /// Labeled positives promoted by the SCAR split
    #[arg(long)]
    n_labeled: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seed for the class-axis direction; defaults to --seed. Give matched
    /// train/test sets the same direction seed with different sample seeds.
    #[arg(long)]
    direction_seed: Option<u64>,
    /// Output dataset CSV
    #[arg(long)]
    out: PathBuf,
    /// Key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset CSV
    #[arg(long)]
    data: PathBuf,
    /// Output trace CSV
    #[arg(long)]
    out_traces: PathBuf,
    /// Optional model checkpoint
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[command(flatten)]
    training: TrainingFlags,
}

#[derive(Args, Debug)]
struct ScoreTrendsArgs {
    /// Trace CSV
    #[arg(long)]
    traces: PathBuf,
    /// Output score CSV
    #[arg(long)]
    out: PathBuf,
    /// Stop snapshot (defaults to every recorded snapshot)
    #[arg(long)]
    t_stop: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// mean, full or simplified
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MkTestArgs {
    /// Trace CSV
    #[arg(long)]
    traces: PathBuf,
    /// Output verdict CSV
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    significance: f64,
}

#[derive(Args, Debug)]
struct PartitionArgs {
    /// Score CSV (with or without an existing pseudo_label column)
    #[arg(long)]
    scores: PathBuf,
    /// Output score CSV with pseudo-labels
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RetrainArgs {
    /// Dataset CSV
    #[arg(long)]
    data: PathBuf,
    /// Score CSV carrying pseudo-labels
    #[arg(long)]
    labels: PathBuf,
    /// Output model checkpoint
    #[arg(long)]
    checkpoint_out: PathBuf,
    /// Optional labeled test set CSV for evaluation
    #[arg(long)]
    test: Option<PathBuf>,
    #[command(flatten)]
    training: TrainingFlags,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Dataset CSV
    #[arg(long)]
    data: PathBuf,
    /// Optional labeled test set CSV
    #[arg(long)]
    test: Option<PathBuf>,
    /// Directory for traces.csv, scores.csv, labels.csv and report.json
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    training: TrainingFlags,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// jenks, gradients, concentration, hyperplane or all
    #[arg(long, default_value = "all")]
    suite: String,
    /// Trial count (jenks inputs, concentration Monte Carlo runs)
    #[arg(long)]
    trials: Option<usize>,
    /// Largest natural-break input size
    #[arg(long, default_value_t = 500)]
    max_n: usize,
    /// Gradient fixtures
    #[arg(long, default_value_t = 50)]
    fixtures: usize,
    /// Hyperplane settings
    #[arg(long, default_value_t = 50)]
    settings: usize,
    /// Concentration tail probability
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write per-trial concentration coverage CSVs with this path prefix
    #[arg(long)]
    coverage_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TraceSummaryArgs {
    /// Trace CSV with true labels
    #[arg(long)]
    traces: PathBuf,
    /// Output CSV: snapshot,class,mean,sd
    #[arg(long)]
    out_means: PathBuf,
    /// Output CSV: class,increasing,decreasing,no_trend
    #[arg(long)]
    out_verdicts: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    significance: f64,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    };
    std::process::exit(code);
}

/// Map error classes onto the documented exit codes.
fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::DegenerateDistribution | Error::DegeneratePartition(_) => 3,
        Error::NumericAbort { .. } | Error::NonFinite { .. } => 4,
        _ => 2,
    }
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::GenData(args) => cmd_gen_data(args).map(|_| 0),
        Command::Train(args) => cmd_train(args).map(|_| 0),
        Command::ScoreTrends(args) => cmd_score_trends(args).map(|_| 0),
        Command::MkTest(args) => cmd_mk_test(args).map(|_| 0),
        Command::Partition(args) => cmd_partition(args).map(|_| 0),
        Command::Retrain(args) => cmd_retrain(args).map(|_| 0),
        Command::Pipeline(args) => cmd_pipeline(args).map(|_| 0),
        Command::Verify(args) => cmd_verify(args),
        Command::TraceSummary(args) => cmd_trace_summary(args).map(|_| 0),
    }
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("missing required flag --{flag}")))
}

fn load_dataset(path: &Path) -> Result<PUDataset> {
    if !path.exists() {
        return Err(Error::Config(format!("dataset {} does not exist", path.display())));
    }
    load_csv(path)
}

fn cmd_gen_data(args: GenDataArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let dim = require(args.dim.or(file.dim), "dim")?;
    let sigma = require(args.sigma.or(file.sigma), "sigma")?;
    let n = require(args.n.or(file.n), "n")?;
    let pi = require(args.pi.or(file.pi), "pi")?;
    let n_labeled = require(args.n_labeled.or(file.n_labeled), "n-labeled")?;
    let seed = args.seed.or(file.seed).unwrap_or(0);

    let direction_seed = args.direction_seed.unwrap_or(seed);
    let direction = random_unit_vector(dim, derive_seed(direction_seed, 100));
    let config = GaussianConfig::new(dim, sigma, direction, n, pi)?;
    let data = gen_two_gaussians(&config, derive_seed(seed, 101))?;
    let pu = make_pu_split(&data, n_labeled, derive_seed(seed, 102))?;
    save_csv(&pu, &args.out)?;

    let unlabeled = pu.unlabeled_indices();
    let truth = pu.hidden_truth().expect("generator keeps truth");
    let unl_pos = unlabeled.iter().filter(|&&row| truth[row] == 0).count();
    println!(
        "wrote {} rows to {} ({} labeled positives, {} unlabeled: {} positive / {} negative)",
        pu.len(),
        args.out.display(),
        n_labeled,
        unlabeled.len(),
        unl_pos,
        unlabeled.len() - unl_pos
    );
    let radius = config.cluster_radius();
    if radius > 2.0 {
        println!("cluster radius sigma*sqrt(p) = {radius:.3} > 2: nontrivial separation");
    } else {
        println!(
            "warning: cluster radius sigma*sqrt(p) = {radius:.3} <= 2: \
             classes nearly merge at this scale"
        );
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let (config, _) = args.training.resolve()?;
    let pu = load_dataset(&args.data)?;
    let (traces, params) = train_and_trace(&pu, &config)?;
    let truth_rows: Option<Vec<u8>> = pu
        .hidden_truth()
        .map(|truth| pu.unlabeled_indices().iter().map(|&row| truth[row]).collect());
    write_trace_csv(&args.out_traces, &traces.ids, &traces.rows, truth_rows.as_deref())?;
    if let Some(path) = &args.checkpoint {
        save_params(&params, path)?;
    }
    println!(
        "recorded {} snapshots of {} unlabeled examples ({} optimizer steps) to {}",
        traces.snapshots(),
        traces.ids.len(),
        traces.snapshots() * traces.snapshot_interval,
        args.out_traces.display()
    );
    Ok(())
}

fn trace_records_to_traces(records: &trendpu::io::TraceRecords) -> Result<Vec<ScoreTrace>> {
    records
        .ids
        .iter()
        .zip(&records.rows)
        .map(|(&id, row)| ScoreTrace::new(id, row.clone()))
        .collect()
}

fn cmd_score_trends(args: ScoreTrendsArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let records = read_trace_csv(&args.traces)?;
    let t_stop = args.t_stop.unwrap_or(records.snapshots());
    if t_stop < 2 || t_stop > records.snapshots() {
        return Err(Error::StopOutOfRange {
            got: t_stop,
            max: records.snapshots(),
        });
    }
    let mut params = TrendScoreParams::default();
    if let Some(alpha) = args.alpha.or(file.alpha) {
        params.alpha = alpha;
    }
    if let Some(text) = &args.estimator {
        params.estimator = parse_estimator(text)?;
    } else if let Some(estimator) = file.estimator {
        params.estimator = estimator;
    }
    let params = TrendScoreParams::new(params.alpha, params.estimator)?;
    let traces: Vec<ScoreTrace> = trace_records_to_traces(&records)?
        .iter()
        .map(|t| t.truncated(t_stop))
        .collect();
    let scores = score_all(&traces, &params)?;
    write_score_csv(&args.out, &scores, None)?;
    println!(
        "scored {} traces with the {} estimator (alpha {}, t_stop {t_stop}) to {}",
        scores.len(),
        params.estimator,
        params.alpha,
        args.out.display()
    );
    Ok(())
}

fn cmd_mk_test(args: MkTestArgs) -> Result<()> {
    let records = read_trace_csv(&args.traces)?;
    let traces = trace_records_to_traces(&records)?;
    let mut out = String::from("example_id,s,variance,z,gamma,direction\n");
    let mut counts = BTreeMap::new();
    for trace in &traces {
        let verdict = mk_test(trace, args.significance)?;
        *counts.entry(verdict.direction.to_string()).or_insert(0usize) += 1;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            trace.example_id(),
            verdict.s_statistic,
            verdict.variance,
            verdict.z_value,
            verdict.gamma,
            verdict.direction
        ));
    }
    std::fs::write(&args.out, out)?;
    let summary: Vec<String> = counts
        .iter()
        .map(|(direction, count)| format!("{direction}: {count}"))
        .collect();
    println!(
        "tested {} traces at significance {} -> {}",
        traces.len(),
        args.significance,
        summary.join(", ")
    );
    Ok(())
}

fn cmd_partition(args: PartitionArgs) -> Result<()> {
    let records = read_score_csv(&args.scores)?;
    let (labels, break_result) = partition_by_trend(&records.scores)?;
    write_score_csv(&args.out, &records.scores, Some(&labels))?;
    let prior = estimate_prior(&labels);
    println!(
        "break index {} (objective {:.6}): {} pseudo-negative, {} pseudo-positive \
         (estimated unlabeled prior {:.4})",
        break_result.break_index,
        break_result.objective,
        break_result.break_index,
        labels.len() - break_result.break_index,
        prior
    );
    Ok(())
}

fn cmd_retrain(args: RetrainArgs) -> Result<()> {
    let (config, _) = args.training.resolve()?;
    let pu = load_dataset(&args.data)?;
    let records = read_score_csv(&args.labels)?;
    let labels = records.labels.ok_or_else(|| {
        Error::Config(format!(
            "{} has no pseudo_label column; run `trendpu partition` first",
            args.labels.display()
        ))
    })?;
    let params = retrain(&pu, &labels, &config)?;
    save_params(&params, &args.checkpoint_out)?;
    println!("retrained model written to {}", args.checkpoint_out.display());
    if let Some(test_path) = &args.test {
        let test = load_dataset(test_path)?;
        let truth = test.hidden_truth().ok_or_else(|| {
            Error::EvaluationUnavailable("test set has no true labels".into())
        })?;
        let p = predict_scores(&params, test.features())?;
        let metrics = evaluate_scores(&p, truth)?;
        println!("test metrics: {}", format_metrics(&metrics));
    }
    Ok(())
}

fn format_metrics(m: &Metrics) -> String {
    let auc = m
        .auc
        .map(|a| format!("{a:.4}"))
        .unwrap_or_else(|| "-".into());
    format!(
        "accuracy {:.4}, precision {:.4}, recall {:.4}, F1 {:.4}, AUC {auc}",
        m.accuracy, m.precision, m.recall, m.f1
    )
}

fn cmd_pipeline(args: PipelineArgs) -> Result<()> {
    let (config, _) = args.training.resolve()?;
    let pu = load_dataset(&args.data)?;
    let test = match &args.test {
        Some(path) => Some(load_dataset(path)?),
        None => None,
    };
    let mut outcome = run_pipeline(&config, &pu, test.as_ref())?;
    outcome.report.dataset_path = Some(args.data.display().to_string());
    outcome.report.test_path = args.test.as_ref().map(|p| p.display().to_string());
    outcome.persist(&args.out_dir, &pu)?;

    let report = &outcome.report;
    println!(
        "t_stop {} of {} snapshots; break index {}; {} pseudo-positive, {} pseudo-negative",
        report.t_stop,
        report.snapshots,
        report.break_index,
        report.pseudo_positive,
        report.pseudo_negative
    );
    println!(
        "estimated prior: unlabeled {:.4}, whole-data {:.4}",
        report.estimated_prior_unlabeled, report.estimated_prior_whole
    );
    if let Some(m) = &report.unlabeled_metrics {
        println!("unlabeled metrics: {}", format_metrics(m));
    }
    if let Some(m) = &report.test_metrics {
        println!("test metrics: {}", format_metrics(m));
    }
    let t = &report.timings;
    println!(
        "timings: train {:.2}s, score {:.2}s, partition {:.3}s, retrain {:.2}s, \
         evaluate {:.2}s, total {:.2}s",
        t.train_s, t.score_s, t.partition_s, t.retrain_s, t.evaluate_s, t.total_s
    );
    println!("artifacts written to {}", args.out_dir.display());
    Ok(())
}

fn print_outcomes(outcomes: &[CheckOutcome]) -> bool {
    let mut all_passed = true;
    for outcome in outcomes {
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{status} {} — {}", outcome.name, outcome.detail);
        all_passed &= outcome.passed;
    }
    all_passed
}

fn cmd_verify(args: VerifyArgs) -> Result<i32> {
    let mut all_passed = true;
    let suite = args.suite.as_str();
    let known = ["all", "jenks", "gradients", "concentration", "hyperplane"];
    if !known.contains(&suite) {
        return Err(Error::Config(format!(
            "unknown suite {suite:?}; expected one of {known:?}"
        )));
    }
    if suite == "all" || suite == "jenks" {
        let trials = args.trials.unwrap_or(200);
        all_passed &= print_outcomes(&verify_jenks(trials, args.max_n, args.seed));
    }
    if suite == "all" || suite == "gradients" {
        all_passed &= print_outcomes(&verify_gradients(args.fixtures, args.seed));
    }
    if suite == "all" || suite == "hyperplane" {
        all_passed &= print_outcomes(&verify_hyperplane(args.settings, args.seed));
    }
    if suite == "all" || suite == "concentration" {
        let trials = args.trials.unwrap_or(1000);
        all_passed &= print_outcomes(&verify_concentration(args.epsilon, trials, args.seed));
        if let Some(prefix) = &args.coverage_csv {
            for (k, t) in [10usize, 20, 40].into_iter().enumerate() {
                let report = concentration_experiment(&ConcentrationConfig {
                    t,
                    alpha: 2.0,
                    mu: 0.1,
                    sigma_d: 0.2,
                    epsilon: args.epsilon,
                    trials,
                    seed: derive_seed(args.seed, k as u64),
                })?;
                let path = PathBuf::from(format!("{}_t{t}.csv", prefix.display()));
                std::fs::write(&path, report.to_csv())?;
                println!("coverage CSV for t = {t} written to {}", path.display());
            }
        }
    }
    Ok(if all_passed { 0 } else { 1 })
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn cmd_trace_summary(args: TraceSummaryArgs) -> Result<()> {
    let records = read_trace_csv(&args.traces)?;
    let truth = records.truth.as_ref().ok_or_else(|| {
        Error::EvaluationUnavailable("trace file has no true labels".into())
    })?;
    let snapshots = records.snapshots();
    let classes: [(&str, u8); 2] = [("positive", 0), ("negative", 1)];

    let mut means_csv = String::from("snapshot,class,mean,sd\n");
    for (name, label) in classes {
        let rows: Vec<&Vec<f64>> = records
            .rows
            .iter()
            .zip(truth)
            .filter(|(_, &y)| y == label)
            .map(|(row, _)| row)
            .collect();
        if rows.is_empty() {
            continue;
        }
        for k in 0..snapshots {
            let column: Vec<f64> = rows.iter().map(|row| row[k]).collect();
            let (mean, sd) = mean_and_sd(&column);
            means_csv.push_str(&format!("{},{name},{mean},{sd}\n", k + 1));
        }
    }
    std::fs::write(&args.out_means, means_csv)?;

    let mut verdicts_csv = String::from("class,increasing,decreasing,no_trend\n");
    let traces = trace_records_to_traces(&records)?;
    for (name, label) in classes {
        let mut counts = [0usize; 3];
        let mut total = 0usize;
        for (trace, &y) in traces.iter().zip(truth) {
            if y != label {
                continue;
            }
            total += 1;
            match mk_test(trace, args.significance)?.direction {
                TrendDirection::Increasing => counts[0] += 1,
                TrendDirection::Decreasing => counts[1] += 1,
                TrendDirection::NoTrend => counts[2] += 1,
            }
        }
        if total == 0 {
            continue;
        }
        let f = |count: usize| count as f64 / total as f64;
        verdicts_csv.push_str(&format!(
            "{name},{},{},{}\n",
            f(counts[0]),
            f(counts[1]),
            f(counts[2])
        ));
    }
    std::fs::write(&args.out_verdicts, verdicts_csv)?;
    println!(
        "wrote per-snapshot class means to {} and verdict fractions to {}",
        args.out_means.display(),
        args.out_verdicts.display()
    );
    Ok(())
}
