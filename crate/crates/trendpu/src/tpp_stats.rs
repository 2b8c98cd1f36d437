//! Trend statistics over score traces.
//!
//! A [`ScoreTrace`] is one unlabeled example's sequence of predicted
//! positive-class probabilities across training snapshots. This module scores
//! how that sequence moves:
//!
//! - [`mk_test`] — the Mann-Kendall trend test with tie-corrected variance,
//!   yielding a direction verdict and a two-sided significance γ;
//! - [`trend_score`] — the robust trend score: the average of the influence
//!   function ψ applied to scaled ordered differences α·(p_j − p_i), i < j;
//! - [`simplified_trend_score`] — the consecutive-difference variant;
//! - [`empirical_mean_score`] — the plain mean of ordered differences.
//!
//! ψ(x) = sign(x)·ln(1 + |x| + x²/2) is odd, strictly increasing, and
//! sub-linear, so single outlier jumps in a trace cannot dominate the score.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Default two-sided significance level for [`mk_test`].
pub const DEFAULT_SIGNIFICANCE: f64 = 0.05;

/// One example's predicted positive-class probabilities over snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTrace {
    example_id: u64,
    scores: Vec<f64>,
}

impl ScoreTrace {
    /// Build a trace, validating that every score is finite and in [0, 1].
    pub fn new(example_id: u64, scores: Vec<f64>) -> Result<Self> {
        for &p in &scores {
            if !p.is_finite() {
                return Err(Error::NonFinite {
                    what: "trace score",
                    value: p,
                });
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ScoreOutOfRange { value: p });
            }
        }
        Ok(Self { example_id, scores })
    }

    pub fn example_id(&self) -> u64 {
        self.example_id
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// The trace restricted to its first `t_stop` snapshots.
    pub fn truncated(&self, t_stop: usize) -> Self {
        Self {
            example_id: self.example_id,
            scores: self.scores[..t_stop.min(self.scores.len())].to_vec(),
        }
    }
}

/// Trend direction assigned by the Mann-Kendall test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TrendDirection {
    Increasing,
    Decreasing,
    NoTrend,
}

impl std::fmt::Display for TrendDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrendDirection::Increasing => write!(f, "increasing"),
            TrendDirection::Decreasing => write!(f, "decreasing"),
            TrendDirection::NoTrend => write!(f, "no-trend"),
        }
    }
}

/// Outcome of the Mann-Kendall test on one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendVerdict {
    /// The pairwise sign statistic S = Σ_{i<j} sign(p_j − p_i).
    pub s_statistic: i64,
    /// Tie-corrected variance of S.
    pub variance: f64,
    /// Continuity-corrected normalized statistic.
    pub z_value: f64,
    /// Two-sided significance, 2·(1 − Φ(|Z|)).
    pub gamma: f64,
    pub direction: TrendDirection,
}

/// Which trend estimator to apply per trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TrendEstimator {
    /// Plain mean of ordered differences.
    EmpiricalMean,
    /// Robust score over all ordered pairs.
    Full,
    /// Robust score over consecutive differences only.
    Simplified,
}

impl std::fmt::Display for TrendEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrendEstimator::EmpiricalMean => write!(f, "mean"),
            TrendEstimator::Full => write!(f, "full"),
            TrendEstimator::Simplified => write!(f, "simplified"),
        }
    }
}

/// Scaling parameter and estimator choice for trend scoring.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrendScoreParams {
    pub alpha: f64,
    pub estimator: TrendEstimator,
}

impl TrendScoreParams {
    pub fn new(alpha: f64, estimator: TrendEstimator) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::Config(format!(
                "alpha must be a positive finite real, got {alpha}"
            )));
        }
        Ok(Self { alpha, estimator })
    }
}

impl Default for TrendScoreParams {
    /// α = 2 with the full pairwise estimator.
    fn default() -> Self {
        Self {
            alpha: 2.0,
            estimator: TrendEstimator::Full,
        }
    }
}

/// Standard normal CDF, accurate to full double precision via erfc.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// ψ evaluated without the finiteness check; callers validate inputs.
pub(crate) fn psi_raw(x: f64) -> f64 {
    sign(x) * (1.0 + x.abs() + 0.5 * x * x).ln()
}

/// The influence function ψ(x) = sign(x)·ln(1 + |x| + x²/2).
///
/// Odd, strictly increasing, and |ψ(x)| ≤ |x| since eˣ ≥ 1 + x + x²/2 for
/// x ≥ 0. Oddness is bitwise: |−x| and (−x)² are bit-identical to |x| and x²,
/// so only the sign factor flips.
pub fn psi(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite {
            what: "psi argument",
            value: x,
        });
    }
    Ok(psi_raw(x))
}

fn require_len(trace: &ScoreTrace) -> Result<&[f64]> {
    if trace.len() < 2 {
        return Err(Error::TraceTooShort { got: trace.len() });
    }
    Ok(trace.scores())
}

/// Mann-Kendall S = Σ_{i<j} sign(p_j − p_i).
pub fn mk_s_statistic(trace: &ScoreTrace) -> Result<i64> {
    let p = require_len(trace)?;
    let mut s = 0i64;
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            s += sign(p[j] - p[i]) as i64;
        }
    }
    Ok(s)
}

/// Tie-corrected variance of S:
/// [n(n−1)(2n+5) − Σ_p t_p(t_p−1)(2t_p+5)] / 18.
///
/// Tie groups are runs of exactly equal values; traces come from identical
/// forward passes, so duplicates are bit-identical and no epsilon is applied.
pub fn mk_variance(trace: &ScoreTrace) -> Result<f64> {
    let p = require_len(trace)?;
    let n = p.len() as f64;
    let mut sorted = p.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("trace scores are finite"));

    let mut tie_term = 0.0;
    let mut run = 1usize;
    for k in 1..=sorted.len() {
        if k < sorted.len() && sorted[k] == sorted[k - 1] {
            run += 1;
        } else {
            if run > 1 {
                let t = run as f64;
                tie_term += t * (t - 1.0) * (2.0 * t + 5.0);
            }
            run = 1;
        }
    }
    Ok((n * (n - 1.0) * (2.0 * n + 5.0) - tie_term) / 18.0)
}

/// Mann-Kendall trend test with continuity correction and two-sided γ.
///
/// A fully tied trace has Var(S) = 0; it is reported as `NoTrend` with Z = 0
/// and γ = 1 rather than dividing by zero.
pub fn mk_test(trace: &ScoreTrace, significance_level: f64) -> Result<TrendVerdict> {
    if !(0.0..1.0).contains(&significance_level) || significance_level <= 0.0 {
        return Err(Error::Config(format!(
            "significance level must be in (0, 1), got {significance_level}"
        )));
    }
    let s = mk_s_statistic(trace)?;
    let variance = mk_variance(trace)?;

    if variance == 0.0 {
        return Ok(TrendVerdict {
            s_statistic: s,
            variance,
            z_value: 0.0,
            gamma: 1.0,
            direction: TrendDirection::NoTrend,
        });
    }

    let sd = variance.sqrt();
    let z = match s.cmp(&0) {
        std::cmp::Ordering::Greater => (s as f64 - 1.0) / sd,
        std::cmp::Ordering::Equal => 0.0,
        std::cmp::Ordering::Less => (s as f64 + 1.0) / sd,
    };
    // 2·(1 − Φ(|Z|)) — written directly as erfc to avoid cancellation in the tail.
    let gamma = libm::erfc(z.abs() / std::f64::consts::SQRT_2);

    let direction = if gamma > significance_level {
        TrendDirection::NoTrend
    } else if z > 0.0 {
        TrendDirection::Increasing
    } else if z < 0.0 {
        TrendDirection::Decreasing
    } else {
        // Z = 0 implies gamma = 1 > level, so this arm is unreachable; kept
        // for totality.
        TrendDirection::NoTrend
    };

    Ok(TrendVerdict {
        s_statistic: s,
        variance,
        z_value: z,
        gamma,
        direction,
    })
}

/// Unbiased empirical mean of ordered differences:
/// (2 / t(t−1)) Σ_{i<j} (p_j − p_i).
pub fn empirical_mean_score(trace: &ScoreTrace) -> Result<f64> {
    let p = require_len(trace)?;
    let t = p.len();
    let mut sum = 0.0;
    for i in 0..t {
        for j in (i + 1)..t {
            sum += p[j] - p[i];
        }
    }
    Ok(2.0 * sum / (t as f64 * (t - 1) as f64))
}

/// Robust trend score: (2 / t(t−1)) Σ_{i<j} ψ(α·(p_j − p_i)).
pub fn trend_score(trace: &ScoreTrace, params: &TrendScoreParams) -> Result<f64> {
    let p = require_len(trace)?;
    let t = p.len();
    let mut sum = 0.0;
    for i in 0..t {
        for j in (i + 1)..t {
            sum += psi_raw(params.alpha * (p[j] - p[i]));
        }
    }
    Ok(2.0 * sum / (t as f64 * (t - 1) as f64))
}

/// Simplified trend score over consecutive differences:
/// (1 / (t−1)) Σ_i ψ(α·(p_{i+1} − p_i)).
pub fn simplified_trend_score(trace: &ScoreTrace, params: &TrendScoreParams) -> Result<f64> {
    let p = require_len(trace)?;
    let sum: f64 = p
        .windows(2)
        .map(|w| psi_raw(params.alpha * (w[1] - w[0])))
        .sum();
    Ok(sum / (p.len() - 1) as f64)
}

/// Apply the estimator selected in `params` to one trace.
pub fn score_with(trace: &ScoreTrace, params: &TrendScoreParams) -> Result<f64> {
    match params.estimator {
        TrendEstimator::EmpiricalMean => empirical_mean_score(trace),
        TrendEstimator::Full => trend_score(trace, params),
        TrendEstimator::Simplified => simplified_trend_score(trace, params),
    }
}

/// Score every trace, keyed and ordered by example id.
///
/// All traces must share one length; scoring is elementwise, so the result is
/// independent of evaluation order.
pub fn score_all(
    traces: &[ScoreTrace],
    params: &TrendScoreParams,
) -> Result<BTreeMap<u64, f64>> {
    let mut out = BTreeMap::new();
    let expected = match traces.first() {
        Some(first) => first.len(),
        None => return Ok(out),
    };
    for trace in traces {
        if trace.len() != expected {
            return Err(Error::MixedTraceLengths {
                expected,
                got: trace.len(),
                example_id: trace.example_id(),
            });
        }
        out.insert(trace.example_id(), score_with(trace, params)?);
    }
    Ok(out)
}
