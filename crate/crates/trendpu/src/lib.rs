//! Trend-based positive-unlabeled (PU) learning.
//!
//! The pipeline trains a binary classifier on positive vs. unlabeled data with
//! balanced resampling (every unlabeled example is treated as negative),
//! records each unlabeled example's predicted positive-class probability over
//! training snapshots, scores the trend of each trace with a robust influence
//! function, splits the trend-score distribution at a Fisher natural break,
//! and retrains a fresh model on the induced pseudo-labels.
//!
//! Modules map onto the pipeline stages:
//!
//! - [`tpp_stats`] — trend statistics over score traces (Mann-Kendall test,
//!   the ψ influence function, and the trend-score estimators).
//! - [`jenks`] — two-cluster Fisher natural-break partitioning in 1D.
//! - [`model`] — minimal differentiable classifiers (logistic / MLP), the
//!   resampling loss, analytic gradients, and Adam.
//! - [`data`] — synthetic two-Gaussian datasets, SCAR PU splits, CSV ingest,
//!   and the balanced batch sampler.
//! - [`pipeline`] — end-to-end orchestration: train → trace → score →
//!   partition → retrain → evaluate.
//! - [`theory`] — executable checks of the analytical claims (Bayesian
//!   decision hyperplanes, concentration of the robust estimator).
//! - [`verify`] — self-check suites used by the CLI's `verify` subcommand.
//!
//! All randomness flows through explicitly seeded ChaCha8 streams; a run with
//! fixed seeds is byte-reproducible, including every file the pipeline emits.

pub mod data;
pub mod error;
pub mod io;
pub mod jenks;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod theory;
pub mod tpp_stats;
pub mod verify;

pub use error::{Error, Result};
