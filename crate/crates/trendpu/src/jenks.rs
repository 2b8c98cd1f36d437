//! Two-cluster Fisher natural-break partitioning of one-dimensional values.
//!
//! The objective is the total normalized within-cluster squared deviation
//!
//! ```text
//!   Σ_{x∈C1}(x − μ1)²/|C1| + Σ_{x∈C2}(x − μ2)²/|C2|
//! ```
//!
//! minimized over contiguous splits of the ascending-sorted values.
//! [`natural_break_oracle`] evaluates every split from scratch in O(N²);
//! [`natural_break_fast`] reaches the same answer in O(N log N) by running
//! Welford-style prefix and suffix recursions for the running mean and sum of
//! squared deviations, then scanning the split chart once. The oracle is kept
//! as a public cross-check for the recursion.
//!
//! A split is never placed strictly inside a run of equal values (sorting is
//! stable and equal values are contiguous), so examples with identical scores
//! always land in the same cluster.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Pseudo-label induced by the trend-score partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PseudoLabel {
    /// High-trend-score cluster.
    Positive,
    /// Low-trend-score cluster.
    Negative,
}

impl std::fmt::Display for PseudoLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PseudoLabel::Positive => write!(f, "positive"),
            PseudoLabel::Negative => write!(f, "negative"),
        }
    }
}

/// Pseudo-labels keyed by example id.
pub type PseudoLabels = BTreeMap<u64, PseudoLabel>;

/// A two-way natural break of sorted values.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakResult {
    /// Number of elements in the low cluster after ascending sort; in [1, N−1].
    pub break_index: usize,
    /// Objective value at the break.
    pub objective: f64,
    /// Permutation mapping sorted positions to original indices.
    pub sorted_order: Vec<usize>,
}

fn validate_values(values: &[f64]) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            need: 2,
            got: values.len(),
        });
    }
    for &v in values {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "break value",
                value: v,
            });
        }
    }
    Ok(())
}

/// Stable argsort by value: returns (sorted values, original indices).
fn sorted_with_order(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let sorted = order.iter().map(|&i| values[i]).collect();
    (sorted, order)
}

/// Split positions that do not separate equal values. Falls back to every
/// position when the input is entirely tied.
fn admissible_splits(sorted: &[f64]) -> Vec<usize> {
    let n = sorted.len();
    let splits: Vec<usize> = (1..n).filter(|&b| sorted[b - 1] != sorted[b]).collect();
    if splits.is_empty() {
        (1..n).collect()
    } else {
        splits
    }
}

/// From-scratch two-pass evaluation of the objective at split `b`.
fn objective_at(sorted: &[f64], b: usize) -> f64 {
    cluster_cost(&sorted[..b]) + cluster_cost(&sorted[b..])
}

fn cluster_cost(cluster: &[f64]) -> f64 {
    let n = cluster.len() as f64;
    let mean = cluster.iter().sum::<f64>() / n;
    cluster.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Exhaustive O(N²) minimizer: evaluates every admissible split from scratch.
/// Ties go to the smallest break index.
pub fn natural_break_oracle(values: &[f64]) -> Result<BreakResult> {
    validate_values(values)?;
    let (sorted, order) = sorted_with_order(values);

    let mut best_b = 0usize;
    let mut best_obj = f64::INFINITY;
    for b in admissible_splits(&sorted) {
        let obj = objective_at(&sorted, b);
        if obj < best_obj {
            best_obj = obj;
            best_b = b;
        }
    }
    Ok(BreakResult {
        break_index: best_b,
        objective: best_obj,
        sorted_order: order,
    })
}

/// Welford scan: `out[k]` holds the sum of squared deviations (M2) of the
/// first k+1 visited elements.
fn welford_m2_scan<'a>(values: impl Iterator<Item = &'a f64>) -> Vec<f64> {
    let mut m2s = Vec::new();
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, &x) in values.enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
        m2s.push(m2);
    }
    m2s
}

/// O(N log N) minimizer: sort, two Welford sweeps, one scan of the split chart.
///
/// Agrees with [`natural_break_oracle`] on break index and objective; the
/// equivalence is enforced by the verification suite.
pub fn natural_break_fast(values: &[f64]) -> Result<BreakResult> {
    validate_values(values)?;
    let (sorted, order) = sorted_with_order(values);
    let n = sorted.len();

    // prefix[k] = M2 of sorted[..k+1]; suffix[k] = M2 of sorted[n-1-k..].
    let prefix = welford_m2_scan(sorted.iter());
    let suffix = welford_m2_scan(sorted.iter().rev());

    let mut best_b = 0usize;
    let mut best_obj = f64::INFINITY;
    for b in admissible_splits(&sorted) {
        let low = prefix[b - 1] / b as f64;
        let high = suffix[n - b - 1] / (n - b) as f64;
        let obj = low + high;
        if obj < best_obj {
            best_obj = obj;
            best_b = b;
        }
    }
    Ok(BreakResult {
        break_index: best_b,
        objective: best_obj,
        sorted_order: order,
    })
}

/// Split trend scores at the natural break and label the high cluster
/// positive, the low cluster negative.
///
/// Rejects fewer than two examples and all-equal score distributions (no
/// meaningful break exists; the pipeline surfaces this as a diagnostic).
pub fn partition_by_trend(scores: &BTreeMap<u64, f64>) -> Result<(PseudoLabels, BreakResult)> {
    if scores.len() < 2 {
        return Err(Error::TooFewValues {
            need: 2,
            got: scores.len(),
        });
    }
    let ids: Vec<u64> = scores.keys().copied().collect();
    let values: Vec<f64> = scores.values().copied().collect();
    validate_values(&values)?;
    if values.iter().all(|&v| v == values[0]) {
        return Err(Error::DegenerateDistribution);
    }

    let result = natural_break_fast(&values)?;
    let mut labels = PseudoLabels::new();
    for (pos, &orig) in result.sorted_order.iter().enumerate() {
        let label = if pos < result.break_index {
            PseudoLabel::Negative
        } else {
            PseudoLabel::Positive
        };
        labels.insert(ids[orig], label);
    }
    Ok((labels, result))
}
