//! End-to-end orchestration of the trend-based PU training procedure.
//!
//! [`run_pipeline`] composes the stages:
//!
//! 1. [`train_and_trace`] — balanced-resampling Adam training against the
//!    negativity assumption, recording a snapshot column of positive-class
//!    probabilities over the whole unlabeled set every `q` optimizer steps;
//! 2. [`select_stop`] — choose the stop snapshot (fixed horizon, or the
//!    mixup-validation approximation of leave-zero-out selection);
//! 3. [`compute_trend_scores`] — truncate traces at the stop snapshot and
//!    apply the configured trend estimator;
//! 4. [`crate::jenks::partition_by_trend`] — pseudo-label by the natural
//!    break, high trend scores becoming positives;
//! 5. [`retrain`] — fresh supervised training on the pseudo-labels;
//! 6. [`evaluate_labels`] / [`evaluate_scores`] — metrics against hidden
//!    truth where available.
//!
//! Any stage failure is wrapped with the stage name. With fixed seeds the
//! whole run — including every persisted artifact — is byte-reproducible, so
//! wall-clock timings live only in the in-memory report, never in the file.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::Rng;

use crate::data::{balanced_batches_with_positives, BalancedBatches, PUDataset};
use crate::error::{Error, Result};
use crate::io;
use crate::jenks::{partition_by_trend, BreakResult, PseudoLabel, PseudoLabels};
use crate::model::{
    adam_step, backward, batch_loss, predict_scores, supervised_backward, supervised_loss,
    AdamState, ModelParams, ModelSpec,
};
use crate::rng::{derive_seed, rng_from_seed, shuffle};
use crate::tpp_stats::{score_all, ScoreTrace, TrendScoreParams};

/// Per-purpose seeds, normally derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PipelineSeeds {
    /// Model initialization before PU training.
    pub init: u64,
    /// Epoch shuffles and positive resampling.
    pub batches: u64,
    /// Validation holdout selection.
    pub holdout: u64,
    /// Unlabeled partners for mixup validation points.
    pub mixup: u64,
    /// Model re-initialization before retraining.
    pub retrain_init: u64,
    /// Epoch shuffles during retraining.
    pub retrain_batches: u64,
}

impl PipelineSeeds {
    pub fn from_master(seed: u64) -> Self {
        Self {
            init: derive_seed(seed, 1),
            batches: derive_seed(seed, 2),
            holdout: derive_seed(seed, 3),
            mixup: derive_seed(seed, 4),
            retrain_init: derive_seed(seed, 5),
            retrain_batches: derive_seed(seed, 6),
        }
    }
}

/// How the stop snapshot is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StoppingStrategy {
    /// Use every recorded snapshot.
    FixedT,
    /// Hold out 20% of labeled positives, mix them 1:1 with random unlabeled
    /// rows, and stop where the mean predicted positive-probability on the
    /// mixtures peaks.
    MixupValidation,
}

/// Full configuration of one pipeline run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PipelineConfig {
    /// Hidden layer widths; empty for logistic regression.
    pub hidden_dims: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Optimizer steps per snapshot; `None` snapshots once per pass over the
    /// unlabeled set (⌊n_u/B⌋ steps).
    pub snapshot_interval: Option<usize>,
    /// Number of snapshot columns to record.
    pub max_snapshots: usize,
    pub trend: TrendScoreParams,
    pub stopping: StoppingStrategy,
    pub retrain_epochs: usize,
    /// Significance level for Mann-Kendall diagnostics.
    pub significance_level: f64,
    pub seeds: PipelineSeeds,
}

impl PipelineConfig {
    /// Defaults: logistic model, lr 0.002, batch size 64, snapshot every 512
    /// steps, 30 snapshots, α = 2 with the full estimator, fixed stopping.
    pub fn new(master_seed: u64) -> Self {
        Self {
            hidden_dims: vec![],
            learning_rate: 0.002,
            batch_size: 64,
            snapshot_interval: Some(512),
            max_snapshots: 30,
            trend: TrendScoreParams::default(),
            stopping: StoppingStrategy::FixedT,
            retrain_epochs: 30,
            significance_level: 0.05,
            seeds: PipelineSeeds::from_master(master_seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.max_snapshots == 0 {
            return Err(Error::Config("max_snapshots must be positive".into()));
        }
        if self.snapshot_interval == Some(0) {
            return Err(Error::Config("snapshot interval must be positive".into()));
        }
        if self.retrain_epochs == 0 {
            return Err(Error::Config("retrain_epochs must be positive".into()));
        }
        if !(self.significance_level > 0.0 && self.significance_level < 1.0) {
            return Err(Error::Config(format!(
                "significance level must be in (0, 1), got {}",
                self.significance_level
            )));
        }
        TrendScoreParams::new(self.trend.alpha, self.trend.estimator)?;
        Ok(())
    }
}

/// Recorded predictions: one row per unlabeled example, one column per
/// snapshot, plus the validation curve when mixup stopping is active.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMatrix {
    pub ids: Vec<u64>,
    pub rows: Vec<Vec<f64>>,
    /// Optimizer steps between snapshots.
    pub snapshot_interval: usize,
    /// Mean predicted positive-probability on the mixup validation points,
    /// one entry per snapshot; present only under mixup stopping.
    pub validation_curve: Option<Vec<f64>>,
}

impl TraceMatrix {
    pub fn new(
        ids: Vec<u64>,
        rows: Vec<Vec<f64>>,
        snapshot_interval: usize,
        validation_curve: Option<Vec<f64>>,
    ) -> Result<Self> {
        if rows.len() != ids.len() {
            return Err(Error::ShapeMismatch {
                expected: ids.len(),
                got: rows.len(),
            });
        }
        let t = rows.first().map(Vec::len).unwrap_or(0);
        for row in &rows {
            if row.len() != t {
                return Err(Error::ShapeMismatch {
                    expected: t,
                    got: row.len(),
                });
            }
            for &p in row {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::ScoreOutOfRange { value: p });
                }
            }
        }
        Ok(Self {
            ids,
            rows,
            snapshot_interval,
            validation_curve,
        })
    }

    pub fn snapshots(&self) -> usize {
        self.rows.first().map(Vec::len).unwrap_or(0)
    }

    pub fn traces(&self) -> Result<Vec<ScoreTrace>> {
        self.ids
            .iter()
            .zip(&self.rows)
            .map(|(&id, row)| ScoreTrace::new(id, row.clone()))
            .collect()
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mixup validation points: each held-out positive averaged 1:1 with a
/// seeded random unlabeled row.
fn build_mixtures(
    pu: &PUDataset,
    held_out: &[usize],
    unlabeled: &[usize],
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    held_out
        .iter()
        .map(|&pos_row| {
            let unl_row = unlabeled[rng.gen_range(0..unlabeled.len())];
            pu.features()[pos_row]
                .iter()
                .zip(&pu.features()[unl_row])
                .map(|(a, b)| 0.5 * a + 0.5 * b)
                .collect()
        })
        .collect()
}

/// Balanced-resampling PU training with trace recording.
///
/// Runs Adam on the resampling loss; after every `q` optimizer steps records
/// one snapshot column of positive-class probabilities over the full
/// unlabeled set, stopping after `max_snapshots` columns. Epochs (one
/// shuffled pass over the unlabeled set) continue seamlessly across snapshot
/// boundaries. Aborts with the failing step index if the loss goes
/// non-finite.
pub fn train_and_trace(
    pu: &PUDataset,
    config: &PipelineConfig,
) -> Result<(TraceMatrix, ModelParams)> {
    config.validate()?;
    let labeled = pu.labeled_indices();
    let unlabeled = pu.unlabeled_indices();
    if labeled.is_empty() {
        return Err(Error::DegenerateClass("no labeled positives".into()));
    }
    if unlabeled.len() < config.batch_size {
        return Err(Error::BatchTooLarge {
            batch_size: config.batch_size,
            unlabeled: unlabeled.len(),
        });
    }

    // Mixup stopping holds 20% of the labeled positives out of training and
    // scores fixed mixture points at every snapshot. Fewer than 5 positives
    // falls back to training on all of them (fixed-horizon stopping).
    let (train_positive, mixtures) = match config.stopping {
        StoppingStrategy::FixedT => (labeled, None),
        StoppingStrategy::MixupValidation => {
            if labeled.len() < 5 {
                (labeled, None)
            } else {
                let mut pool = labeled;
                shuffle(&mut pool, &mut rng_from_seed(config.seeds.holdout));
                let n_val = ((pool.len() as f64 * 0.2).round() as usize).max(1);
                let held_out = pool[..n_val].to_vec();
                let train = pool[n_val..].to_vec();
                let mixtures = build_mixtures(pu, &held_out, &unlabeled, config.seeds.mixup);
                (train, Some(mixtures))
            }
        }
    };

    let q = config
        .snapshot_interval
        .unwrap_or(unlabeled.len() / config.batch_size);
    let spec = ModelSpec::new(pu.dim(), config.hidden_dims.clone())?;
    let mut params = ModelParams::init(&spec, config.seeds.init);
    let mut adam = AdamState::new(&params, config.learning_rate)?;

    let unl_features: Vec<Vec<f64>> = unlabeled
        .iter()
        .map(|&row| pu.features()[row].clone())
        .collect();
    let ids: Vec<u64> = unlabeled.iter().map(|&row| pu.ids()[row]).collect();

    let mut rows: Vec<Vec<f64>> = vec![Vec::with_capacity(config.max_snapshots); ids.len()];
    let mut curve: Option<Vec<f64>> = mixtures.as_ref().map(|_| Vec::new());

    let mut epoch = 0u64;
    let mut stream: BalancedBatches<'_> = balanced_batches_with_positives(
        pu,
        train_positive.clone(),
        config.batch_size,
        derive_seed(config.seeds.batches, epoch),
    )?;
    let mut global_step = 0usize;

    for _ in 0..config.max_snapshots {
        for _ in 0..q {
            let pair = loop {
                match stream.next() {
                    Some(pair) => break pair,
                    None => {
                        epoch += 1;
                        stream = balanced_batches_with_positives(
                            pu,
                            train_positive.clone(),
                            config.batch_size,
                            derive_seed(config.seeds.batches, epoch),
                        )?;
                    }
                }
            };
            global_step += 1;
            let loss = batch_loss(&params, &pair.positive, &pair.unlabeled)?;
            if !loss.is_finite() {
                return Err(Error::NumericAbort { step: global_step });
            }
            let grads = backward(&params, &pair.positive, &pair.unlabeled)?;
            adam_step(&mut params, &grads, &mut adam)?;
        }
        let snapshot = predict_scores(&params, &unl_features)?;
        for (row, &p) in rows.iter_mut().zip(&snapshot) {
            row.push(p);
        }
        if let (Some(curve), Some(mixtures)) = (curve.as_mut(), mixtures.as_ref()) {
            let val_scores = predict_scores(&params, mixtures)?;
            curve.push(mean(&val_scores));
        }
    }

    let traces = TraceMatrix::new(ids, rows, q, curve)?;
    Ok((traces, params))
}

/// Chosen stop snapshot, with a flag for the small-labeled-set fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopSelection {
    pub t_stop: usize,
    /// True when mixup stopping was requested but fewer than 5 labeled
    /// positives forced the fixed-horizon fallback.
    pub fell_back: bool,
}

/// Pick the stop snapshot.
///
/// Fixed stopping returns the full horizon. Mixup stopping returns the
/// earliest snapshot maximizing the recorded validation curve, floored at 2
/// so trend statistics stay defined.
pub fn select_stop(
    traces: &TraceMatrix,
    pu: &PUDataset,
    config: &PipelineConfig,
) -> Result<StopSelection> {
    let t = traces.snapshots();
    if t < 2 {
        return Err(Error::TraceTooShort { got: t });
    }
    match config.stopping {
        StoppingStrategy::FixedT => Ok(StopSelection {
            t_stop: t,
            fell_back: false,
        }),
        StoppingStrategy::MixupValidation => match &traces.validation_curve {
            None => {
                debug_assert!(pu.labeled_indices().len() < 5);
                Ok(StopSelection {
                    t_stop: t,
                    fell_back: true,
                })
            }
            Some(curve) => {
                let mut best = 0usize;
                for (i, v) in curve.iter().enumerate() {
                    if *v > curve[best] {
                        best = i;
                    }
                }
                Ok(StopSelection {
                    t_stop: (best + 1).max(2),
                    fell_back: false,
                })
            }
        },
    }
}

/// Truncate every trace to its first `t_stop` snapshots and score it with the
/// configured estimator.
pub fn compute_trend_scores(
    traces: &TraceMatrix,
    t_stop: usize,
    params: &TrendScoreParams,
) -> Result<BTreeMap<u64, f64>> {
    let t = traces.snapshots();
    if t_stop < 2 || t_stop > t {
        return Err(Error::StopOutOfRange { got: t_stop, max: t });
    }
    let truncated: Vec<ScoreTrace> = traces
        .traces()?
        .iter()
        .map(|trace| trace.truncated(t_stop))
        .collect();
    score_all(&truncated, params)
}

/// Estimated positive prior of the unlabeled mixture: the pseudo-positive
/// fraction.
pub fn estimate_prior(labels: &PseudoLabels) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let positive = labels
        .values()
        .filter(|&&l| l == PseudoLabel::Positive)
        .count();
    positive as f64 / labels.len() as f64
}

/// Supervised retraining on pseudo-labels.
///
/// Training set: labeled positives (label 0) plus every unlabeled row with
/// its pseudo-label (positive → 0, negative → 1). Fresh initialization,
/// standard shuffled minibatches without resampling, same optimizer settings.
pub fn retrain(
    pu: &PUDataset,
    labels: &PseudoLabels,
    config: &PipelineConfig,
) -> Result<ModelParams> {
    config.validate()?;
    let mut rows: Vec<(usize, u8)> = Vec::with_capacity(pu.len());
    for row in pu.labeled_indices() {
        rows.push((row, 0));
    }
    let mut n_pseudo_pos = 0usize;
    let mut n_pseudo_neg = 0usize;
    for row in pu.unlabeled_indices() {
        let id = pu.ids()[row];
        let label = labels
            .get(&id)
            .ok_or_else(|| Error::Config(format!("pseudo-label missing for example {id}")))?;
        match label {
            PseudoLabel::Positive => {
                n_pseudo_pos += 1;
                rows.push((row, 0));
            }
            PseudoLabel::Negative => {
                n_pseudo_neg += 1;
                rows.push((row, 1));
            }
        }
    }
    if n_pseudo_pos == 0 || n_pseudo_neg == 0 {
        return Err(Error::DegeneratePartition(format!(
            "pseudo-positive = {n_pseudo_pos}, pseudo-negative = {n_pseudo_neg}"
        )));
    }

    let spec = ModelSpec::new(pu.dim(), config.hidden_dims.clone())?;
    let mut params = ModelParams::init(&spec, config.seeds.retrain_init);
    let mut adam = AdamState::new(&params, config.learning_rate)?;
    let mut global_step = 0usize;

    for epoch in 0..config.retrain_epochs {
        let mut order = rows.clone();
        shuffle(
            &mut order,
            &mut rng_from_seed(derive_seed(config.seeds.retrain_batches, epoch as u64)),
        );
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Vec<f64>> = chunk
                .iter()
                .map(|&(row, _)| pu.features()[row].clone())
                .collect();
            let targets: Vec<u8> = chunk.iter().map(|&(_, y)| y).collect();
            global_step += 1;
            let loss = supervised_loss(&params, &batch, &targets)?;
            if !loss.is_finite() {
                return Err(Error::NumericAbort { step: global_step });
            }
            let grads = supervised_backward(&params, &batch, &targets)?;
            adam_step(&mut params, &grads, &mut adam)?;
        }
    }
    Ok(params)
}

/// Classification metrics with the positive class being label 0.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Rank-statistic AUC; absent when only hard labels were evaluated.
    pub auc: Option<f64>,
}

/// Metrics from hard labels (AUC left empty).
pub fn evaluate_labels(predicted: &[u8], truth: &[u8]) -> Result<Metrics> {
    if predicted.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EvaluationUnavailable("no examples".into()));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut tn = 0usize;
    let mut fn_ = 0usize;
    for (&pred, &t) in predicted.iter().zip(truth) {
        match (pred, t) {
            (0, 0) => tp += 1,
            (0, 1) => fp += 1,
            (1, 1) => tn += 1,
            (1, 0) => fn_ += 1,
            _ => {
                return Err(Error::Config("labels must be 0 or 1".into()));
            }
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        accuracy: (tp + tn) as f64 / truth.len() as f64,
        precision,
        recall,
        f1,
        auc: None,
    })
}

/// AUC by the rank statistic with ties counted half. `scores` are oriented so
/// larger means more positive (label 0).
pub fn auc_rank(scores: &[f64], truth: &[u8]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            expected: truth.len(),
            got: scores.len(),
        });
    }
    let n_pos = truth.iter().filter(|&&y| y == 0).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::EvaluationUnavailable(
            "AUC needs both classes present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // Midranks over tie runs, 1-based.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if truth[idx] == 0 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let n_pos_f = n_pos as f64;
    Ok((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

/// Metrics from positive-class scores: hard labels by thresholding p at 0.5
/// plus rank AUC.
pub fn evaluate_scores(positive_scores: &[f64], truth: &[u8]) -> Result<Metrics> {
    let predicted: Vec<u8> = positive_scores
        .iter()
        .map(|&p| if p >= 0.5 { 0 } else { 1 })
        .collect();
    let mut metrics = evaluate_labels(&predicted, truth)?;
    metrics.auc = Some(auc_rank(positive_scores, truth)?);
    Ok(metrics)
}

/// Wall-clock stage timings in seconds. Excluded from the serialized report:
/// report files must be byte-identical across reruns with equal seeds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub train_s: f64,
    pub score_s: f64,
    pub partition_s: f64,
    pub retrain_s: f64,
    pub evaluate_s: f64,
    pub total_s: f64,
}

/// Everything the pipeline reports about one run.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub dataset_path: Option<String>,
    pub test_path: Option<String>,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    pub snapshots: usize,
    pub snapshot_interval: usize,
    pub t_stop: usize,
    pub stop_fell_back: bool,
    pub break_index: usize,
    pub break_objective: f64,
    pub pseudo_positive: usize,
    pub pseudo_negative: usize,
    /// Pseudo-positive fraction of the unlabeled set.
    pub estimated_prior_unlabeled: f64,
    /// Prior over labeled + unlabeled, counting labeled rows as positive.
    pub estimated_prior_whole: f64,
    pub unlabeled_metrics: Option<Metrics>,
    pub test_metrics: Option<Metrics>,
    #[serde(skip)]
    pub timings: StageTimings,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Artifact filenames used by [`PipelineOutcome::persist`].
pub const TRACE_FILE: &str = "traces.csv";
pub const SCORE_FILE: &str = "scores.csv";
pub const LABEL_FILE: &str = "labels.csv";
pub const REPORT_FILE: &str = "report.json";

/// Full output of one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub report: RunReport,
    pub traces: TraceMatrix,
    pub scores: BTreeMap<u64, f64>,
    pub labels: PseudoLabels,
    pub break_result: BreakResult,
    pub retrained: ModelParams,
}

impl PipelineOutcome {
    /// Write traces, scores, pseudo-labels, and the report under `dir`.
    /// `pu` supplies hidden truth for the trace file when available.
    pub fn persist(&self, dir: &Path, pu: &PUDataset) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let truth_rows: Option<Vec<u8>> = pu.hidden_truth().map(|truth| {
            pu.unlabeled_indices()
                .iter()
                .map(|&row| truth[row])
                .collect()
        });
        io::write_trace_csv(
            &dir.join(TRACE_FILE),
            &self.traces.ids,
            &self.traces.rows,
            truth_rows.as_deref(),
        )?;
        io::write_score_csv(&dir.join(SCORE_FILE), &self.scores, Some(&self.labels))?;
        let mut labels_csv = String::from("example_id,pseudo_label\n");
        for (id, label) in &self.labels {
            labels_csv.push_str(&format!("{id},{label}\n"));
        }
        std::fs::write(dir.join(LABEL_FILE), labels_csv)?;
        self.report.write(&dir.join(REPORT_FILE))?;
        Ok(())
    }
}

/// Run the full procedure: train → stop → score → partition → retrain →
/// evaluate. `test` is an optional held-out set with hidden truth.
pub fn run_pipeline(
    config: &PipelineConfig,
    pu: &PUDataset,
    test: Option<&PUDataset>,
) -> Result<PipelineOutcome> {
    let t_total = Instant::now();
    let mut timings = StageTimings::default();

    let t0 = Instant::now();
    let (traces, _pu_params) = train_and_trace(pu, config).map_err(Error::in_stage("train"))?;
    timings.train_s = t0.elapsed().as_secs_f64();

    let stop = select_stop(&traces, pu, config).map_err(Error::in_stage("select-stop"))?;

    let t0 = Instant::now();
    let scores = compute_trend_scores(&traces, stop.t_stop, &config.trend)
        .map_err(Error::in_stage("score"))?;
    timings.score_s = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let (labels, break_result) =
        partition_by_trend(&scores).map_err(Error::in_stage("partition"))?;
    timings.partition_s = t0.elapsed().as_secs_f64();

    let prior_unlabeled = estimate_prior(&labels);
    let n_labeled = pu.labeled_indices().len();
    let n_unlabeled = labels.len();
    let pseudo_positive = labels
        .values()
        .filter(|&&l| l == PseudoLabel::Positive)
        .count();
    let prior_whole = (n_labeled as f64 + prior_unlabeled * n_unlabeled as f64)
        / (n_labeled + n_unlabeled) as f64;

    let t0 = Instant::now();
    let retrained = retrain(pu, &labels, config).map_err(Error::in_stage("retrain"))?;
    timings.retrain_s = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let unlabeled_metrics = match pu.hidden_truth() {
        Some(truth) => {
            let unl = pu.unlabeled_indices();
            let predicted: Vec<u8> = unl
                .iter()
                .map(|&row| match labels[&pu.ids()[row]] {
                    PseudoLabel::Positive => 0,
                    PseudoLabel::Negative => 1,
                })
                .collect();
            let actual: Vec<u8> = unl.iter().map(|&row| truth[row]).collect();
            let mut metrics =
                evaluate_labels(&predicted, &actual).map_err(Error::in_stage("evaluate"))?;
            let trend_values: Vec<f64> = unl.iter().map(|&row| scores[&pu.ids()[row]]).collect();
            metrics.auc =
                Some(auc_rank(&trend_values, &actual).map_err(Error::in_stage("evaluate"))?);
            Some(metrics)
        }
        None => None,
    };
    let test_metrics = match test {
        Some(test_set) => {
            let truth = test_set.hidden_truth().ok_or_else(|| {
                Error::in_stage("evaluate")(Error::EvaluationUnavailable(
                    "test set has no true labels".into(),
                ))
            })?;
            let p = predict_scores(&retrained, test_set.features())
                .map_err(Error::in_stage("evaluate"))?;
            Some(evaluate_scores(&p, truth).map_err(Error::in_stage("evaluate"))?)
        }
        None => None,
    };
    timings.evaluate_s = t0.elapsed().as_secs_f64();
    timings.total_s = t_total.elapsed().as_secs_f64();

    let report = RunReport {
        config: config.clone(),
        dataset_path: None,
        test_path: None,
        n_labeled,
        n_unlabeled,
        snapshots: traces.snapshots(),
        snapshot_interval: traces.snapshot_interval,
        t_stop: stop.t_stop,
        stop_fell_back: stop.fell_back,
        break_index: break_result.break_index,
        break_objective: break_result.objective,
        pseudo_positive,
        pseudo_negative: n_unlabeled - pseudo_positive,
        estimated_prior_unlabeled: prior_unlabeled,
        estimated_prior_whole: prior_whole,
        unlabeled_metrics,
        test_metrics,
        timings,
    };

    Ok(PipelineOutcome {
        report,
        traces,
        scores,
        labels,
        break_result,
        retrained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_two_gaussians, make_pu_split, GaussianConfig};

    fn small_fixture(seed: u64) -> PUDataset {
        let mut v = vec![0.0; 4];
        v[0] = 1.0;
        let cfg = GaussianConfig::new(4, 0.5, v, 200, 0.5).unwrap();
        let data = gen_two_gaussians(&cfg, seed).unwrap();
        make_pu_split(&data, 30, seed + 1).unwrap()
    }

    fn small_config(seed: u64) -> PipelineConfig {
        let mut config = PipelineConfig::new(seed);
        config.batch_size = 16;
        config.snapshot_interval = None; // one pass over unlabeled per snapshot
        config.max_snapshots = 8;
        config.retrain_epochs = 8;
        // Few steps at this scale; a larger rate keeps the tiny fixtures
        // trainable.
        config.learning_rate = 0.02;
        config
    }

    #[test]
    fn train_and_trace_shapes_and_determinism() {
        let pu = small_fixture(5);
        let config = small_config(9);
        let (a, _) = train_and_trace(&pu, &config).unwrap();
        assert_eq!(a.snapshots(), 8);
        assert_eq!(a.ids.len(), 170);
        assert_eq!(a.snapshot_interval, 170 / 16);
        let (b, _) = train_and_trace(&pu, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn train_single_snapshot() {
        let pu = small_fixture(5);
        let mut config = small_config(9);
        config.max_snapshots = 1;
        let (traces, params) = train_and_trace(&pu, &config).unwrap();
        assert_eq!(traces.snapshots(), 1);
        // The single column is the model's prediction after q steps.
        let unl: Vec<Vec<f64>> = pu
            .unlabeled_indices()
            .iter()
            .map(|&row| pu.features()[row].clone())
            .collect();
        let direct = predict_scores(&params, &unl).unwrap();
        let column: Vec<f64> = traces.rows.iter().map(|r| r[0]).collect();
        assert_eq!(column, direct);
    }

    #[test]
    fn paper_defaults_step_budget() {
        // 30 snapshots at 512 steps between snapshots = 15,360 optimizer steps.
        let config = PipelineConfig::new(0);
        assert_eq!(config.max_snapshots, 30);
        assert_eq!(config.snapshot_interval, Some(512));
        assert_eq!(config.max_snapshots * config.snapshot_interval.unwrap(), 15_360);
    }

    #[test]
    fn select_stop_fixed_and_mixup() {
        let pu = small_fixture(5);
        let config = small_config(9);
        let traces = TraceMatrix::new(
            vec![0, 1],
            vec![vec![0.5; 20], vec![0.5; 20]],
            10,
            None,
        )
        .unwrap();
        let stop = select_stop(&traces, &pu, &config).unwrap();
        assert_eq!(stop.t_stop, 20);
        assert!(!stop.fell_back);

        // Mixup: validation curve peaks at snapshot 12 then degrades.
        let mut curve = vec![0.0; 20];
        for (i, v) in curve.iter_mut().enumerate() {
            *v = if i < 12 {
                0.3 + i as f64 * 0.05
            } else {
                0.9 - (i - 11) as f64 * 0.1
            };
        }
        let traces = TraceMatrix::new(
            vec![0, 1],
            vec![vec![0.5; 20], vec![0.5; 20]],
            10,
            Some(curve.clone()),
        )
        .unwrap();
        let mut config = config;
        config.stopping = StoppingStrategy::MixupValidation;
        let stop = select_stop(&traces, &pu, &config).unwrap();
        assert_eq!(stop.t_stop, 12);

        // Monotone-improving curve: argmax at the end.
        let rising: Vec<f64> = (0..20).map(|i| i as f64 * 0.01).collect();
        let traces = TraceMatrix::new(
            vec![0, 1],
            vec![vec![0.5; 20], vec![0.5; 20]],
            10,
            Some(rising),
        )
        .unwrap();
        assert_eq!(select_stop(&traces, &pu, &config).unwrap().t_stop, 20);
    }

    #[test]
    fn mixup_falls_back_on_tiny_labeled_set() {
        let mut v = vec![0.0; 3];
        v[0] = 1.0;
        let cfg = GaussianConfig::new(3, 0.5, v, 100, 0.5).unwrap();
        let data = gen_two_gaussians(&cfg, 2).unwrap();
        let pu = make_pu_split(&data, 3, 3).unwrap();
        let mut config = small_config(4);
        config.stopping = StoppingStrategy::MixupValidation;
        let (traces, _) = train_and_trace(&pu, &config).unwrap();
        assert!(traces.validation_curve.is_none());
        let stop = select_stop(&traces, &pu, &config).unwrap();
        assert!(stop.fell_back);
        assert_eq!(stop.t_stop, traces.snapshots());
    }

    #[test]
    fn trend_scores_match_loop_and_respect_bounds() {
        let pu = small_fixture(5);
        let config = small_config(9);
        let (traces, _) = train_and_trace(&pu, &config).unwrap();
        let scores = compute_trend_scores(&traces, 6, &config.trend).unwrap();
        for trace in traces.traces().unwrap() {
            let expected =
                crate::tpp_stats::trend_score(&trace.truncated(6), &config.trend).unwrap();
            assert_eq!(scores[&trace.example_id()], expected);
        }
        assert!(matches!(
            compute_trend_scores(&traces, 1, &config.trend),
            Err(Error::StopOutOfRange { .. })
        ));
        assert!(matches!(
            compute_trend_scores(&traces, 9, &config.trend),
            Err(Error::StopOutOfRange { .. })
        ));
    }

    #[test]
    fn estimate_prior_counts() {
        let mut labels = PseudoLabels::new();
        for id in 0..1800u64 {
            labels.insert(
                id,
                if id < 800 {
                    PseudoLabel::Positive
                } else {
                    PseudoLabel::Negative
                },
            );
        }
        assert!((estimate_prior(&labels) - 800.0 / 1800.0).abs() < 1e-12);
        let all_neg: PseudoLabels =
            (0..5u64).map(|id| (id, PseudoLabel::Negative)).collect();
        assert_eq!(estimate_prior(&all_neg), 0.0);
    }

    #[test]
    fn retrain_rejects_one_sided_partition() {
        let pu = small_fixture(5);
        let config = small_config(9);
        let labels: PseudoLabels = pu
            .unlabeled_indices()
            .iter()
            .map(|&row| (pu.ids()[row], PseudoLabel::Negative))
            .collect();
        assert!(matches!(
            retrain(&pu, &labels, &config),
            Err(Error::DegeneratePartition(_))
        ));
    }

    #[test]
    fn evaluate_label_examples() {
        let m = evaluate_labels(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.f1, 1.0);

        // 3 of 4 correct with one false negative; positives = 2.
        let m = evaluate_labels(&[0, 1, 1, 1], &[0, 0, 1, 1]).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.recall, 0.5);
        assert_eq!(m.precision, 1.0);
    }

    #[test]
    fn auc_examples() {
        // Perfect ranking: positives (label 0) carry the highest scores.
        let auc = auc_rank(&[0.8, 0.9, 0.1, 0.2], &[0, 0, 1, 1]).unwrap();
        assert_eq!(auc, 1.0);
        // All tied: 0.5 by the half-tie convention.
        let auc = auc_rank(&[0.5, 0.5, 0.5, 0.5], &[0, 0, 1, 1]).unwrap();
        assert_eq!(auc, 0.5);
        assert!(auc_rank(&[0.1, 0.2], &[0, 0]).is_err());
    }

    #[test]
    fn pipeline_end_to_end_and_deterministic() {
        let pu = small_fixture(21);
        let config = small_config(22);
        let test = {
            let mut v = vec![0.0; 4];
            v[0] = 1.0;
            let cfg = GaussianConfig::new(4, 0.5, v, 100, 0.5).unwrap();
            gen_two_gaussians(&cfg, 23).unwrap().into_pu().unwrap()
        };
        let a = run_pipeline(&config, &pu, Some(&test)).unwrap();
        let b = run_pipeline(&config, &pu, Some(&test)).unwrap();
        assert_eq!(a.report.to_json(), b.report.to_json());
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.labels, b.labels);

        // Well separated Gaussians: the pipeline should be highly accurate.
        let unl = a.report.unlabeled_metrics.unwrap();
        assert!(unl.accuracy > 0.9, "unlabeled accuracy {}", unl.accuracy);
        let test_m = a.report.test_metrics.unwrap();
        assert!(test_m.accuracy > 0.9, "test accuracy {}", test_m.accuracy);
        assert!(test_m.auc.unwrap() > 0.95);
        assert!((0.0..=1.0).contains(&a.report.estimated_prior_unlabeled));
    }

    #[test]
    fn pipeline_flags_degenerate_scores() {
        // Constant features force identical traces and all-equal trend
        // scores; the partition stage must surface the degenerate error.
        let n = 40;
        let pu = PUDataset::new(
            (0..n as u64).collect(),
            vec![vec![1.0, 1.0]; n],
            (0..n).map(|i| i < 8).collect(),
            None,
        )
        .unwrap();
        let mut config = small_config(1);
        config.batch_size = 8;
        config.max_snapshots = 3;
        let err = run_pipeline(&config, &pu, None).unwrap_err();
        match &err {
            Error::Stage { stage, source } => {
                assert_eq!(*stage, "partition");
                assert!(matches!(source.root(), Error::DegenerateDistribution));
            }
            other => panic!("expected stage error, got {other:?}"),
        }
    }

    #[test]
    fn persist_writes_all_artifacts() {
        let pu = small_fixture(31);
        let config = small_config(32);
        let outcome = run_pipeline(&config, &pu, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        outcome.persist(dir.path(), &pu).unwrap();
        for file in [TRACE_FILE, SCORE_FILE, LABEL_FILE, REPORT_FILE] {
            assert!(dir.path().join(file).exists(), "{file} missing");
        }
        let records = io::read_trace_csv(&dir.path().join(TRACE_FILE)).unwrap();
        assert_eq!(records.ids, outcome.traces.ids);
        assert_eq!(records.rows, outcome.traces.rows);
        let scores = io::read_score_csv(&dir.path().join(SCORE_FILE)).unwrap();
        assert_eq!(scores.scores, outcome.scores);
        assert_eq!(scores.labels.unwrap(), outcome.labels);
    }
}
