//! Plain key=value configuration files.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are rejected
//! so typos fail loudly. Command-line flags override file values.

use std::path::Path;

use trendpu::pipeline::StoppingStrategy;
use trendpu::tpp_stats::TrendEstimator;
use trendpu::{Error, Result};

/// Optional values read from a config file; `None` means "not set".
#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    pub dim: Option<usize>,
    pub sigma: Option<f64>,
    pub n: Option<usize>,
    pub pi: Option<f64>,
    pub n_labeled: Option<usize>,
    pub seed: Option<u64>,
    pub batch_size: Option<usize>,
    /// `Some(None)` encodes `snapshot_interval = auto`.
    pub snapshot_interval: Option<Option<usize>>,
    pub max_snapshots: Option<usize>,
    pub alpha: Option<f64>,
    pub estimator: Option<TrendEstimator>,
    pub learning_rate: Option<f64>,
    pub hidden_dims: Option<Vec<usize>>,
    pub stopping: Option<StoppingStrategy>,
    pub retrain_epochs: Option<usize>,
    pub significance: Option<f64>,
}

pub fn parse_estimator(text: &str) -> Result<TrendEstimator> {
    match text {
        "mean" => Ok(TrendEstimator::EmpiricalMean),
        "full" => Ok(TrendEstimator::Full),
        "simplified" => Ok(TrendEstimator::Simplified),
        other => Err(Error::Config(format!(
            "estimator must be mean, full or simplified, got {other:?}"
        ))),
    }
}

pub fn parse_stopping(text: &str) -> Result<StoppingStrategy> {
    match text {
        "fixed" => Ok(StoppingStrategy::FixedT),
        "mixup" => Ok(StoppingStrategy::MixupValidation),
        other => Err(Error::Config(format!(
            "stopping must be fixed or mixup, got {other:?}"
        ))),
    }
}

pub fn parse_hidden_dims(text: &str) -> Result<Vec<usize>> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(vec![]);
    }
    trimmed
        .split(',')
        .map(|cell| {
            cell.trim().parse::<usize>().map_err(|_| {
                Error::Config(format!("hidden_dims must be comma-separated widths, got {text:?}"))
            })
        })
        .collect()
}

pub fn parse_snapshot_interval(text: &str) -> Result<Option<usize>> {
    if text == "auto" {
        return Ok(None);
    }
    text.parse::<usize>().map(Some).map_err(|_| {
        Error::Config(format!(
            "snapshot_interval must be a step count or \"auto\", got {text:?}"
        ))
    })
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = FileConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected key = value, got {raw:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad_value = |what: &str| Error::Parse {
                line: line_no,
                msg: format!("bad {what}: {value:?}"),
            };
            match key {
                "dim" => config.dim = Some(value.parse().map_err(|_| bad_value("dim"))?),
                "sigma" => config.sigma = Some(value.parse().map_err(|_| bad_value("sigma"))?),
                "n" => config.n = Some(value.parse().map_err(|_| bad_value("n"))?),
                "pi" => config.pi = Some(value.parse().map_err(|_| bad_value("pi"))?),
                "n_labeled" => {
                    config.n_labeled = Some(value.parse().map_err(|_| bad_value("n_labeled"))?)
                }
                "seed" => config.seed = Some(value.parse().map_err(|_| bad_value("seed"))?),
                "batch_size" => {
                    config.batch_size = Some(value.parse().map_err(|_| bad_value("batch_size"))?)
                }
                "snapshot_interval" => {
                    config.snapshot_interval = Some(parse_snapshot_interval(value)?)
                }
                "max_snapshots" => {
                    config.max_snapshots =
                        Some(value.parse().map_err(|_| bad_value("max_snapshots"))?)
                }
                "alpha" => config.alpha = Some(value.parse().map_err(|_| bad_value("alpha"))?),
                "estimator" => config.estimator = Some(parse_estimator(value)?),
                "learning_rate" => {
                    config.learning_rate =
                        Some(value.parse().map_err(|_| bad_value("learning_rate"))?)
                }
                "hidden_dims" => config.hidden_dims = Some(parse_hidden_dims(value)?),
                "stopping" => config.stopping = Some(parse_stopping(value)?),
                "retrain_epochs" => {
                    config.retrain_epochs =
                        Some(value.parse().map_err(|_| bad_value("retrain_epochs"))?)
                }
                "significance" => {
                    config.significance =
                        Some(value.parse().map_err(|_| bad_value("significance"))?)
                }
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unknown configuration key {other:?}"),
                    })
                }
            }
        }
        Ok(config)
    }
}
