//! Datasets: synthetic two-Gaussian generation, SCAR positive-unlabeled
//! splits, CSV persistence, and the balanced batch sampler.
//!
//! The synthetic generator draws the positive class (label 0) from
//! N(+v, σ²I) and the negative class (label 1) from N(−v, σ²I) for a unit
//! direction v. SCAR splitting promotes a uniform random subset of true
//! positives to the labeled set; everything else becomes the unlabeled set,
//! with true labels retained only for evaluation.
//!
//! The batch sampler realizes the resampling strategy: one epoch is one
//! shuffled pass over the unlabeled set in chunks of B, and each chunk is
//! paired with B labeled positives drawn uniformly with replacement, so every
//! emitted pair satisfies |B_p| = |B_u| = B.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, shuffle, BoxMuller};

/// Configuration of the two-Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianConfig {
    pub dim: usize,
    pub sigma: f64,
    /// Unit vector; class means are +v and −v.
    pub direction: Vec<f64>,
    pub n: usize,
    /// Positive class prior, in (0, 1).
    pub pi: f64,
}

impl GaussianConfig {
    pub fn new(dim: usize, sigma: f64, direction: Vec<f64>, n: usize, pi: f64) -> Result<Self> {
        if dim == 0 || n == 0 {
            return Err(Error::Config("dim and n must be positive".into()));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        if !(pi.is_finite() && 0.0 < pi && pi < 1.0) {
            return Err(Error::Config(format!("pi must be in (0, 1), got {pi}")));
        }
        if direction.len() != dim {
            return Err(Error::ShapeMismatch {
                expected: dim,
                got: direction.len(),
            });
        }
        let norm: f64 = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "direction must be a unit vector, |v| = {norm}"
            )));
        }
        Ok(Self {
            dim,
            sigma,
            direction,
            n,
            pi,
        })
    }

    /// Cluster radius σ√p; the classification problem is nontrivial when this
    /// exceeds 2 (a warning condition, not an error).
    pub fn cluster_radius(&self) -> f64 {
        self.sigma * (self.dim as f64).sqrt()
    }
}

/// A seeded unit vector, for configs without a hand-picked direction.
pub fn random_unit_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let mut bm = BoxMuller::new();
    loop {
        let v: Vec<f64> = (0..dim).map(|_| bm.sample(&mut rng)).collect();
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Fully labeled data: feature rows with true labels (0 = positive).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub ids: Vec<u64>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl LabeledData {
    /// Wrap as a PU dataset with an empty labeled set (e.g. a test set).
    pub fn into_pu(self) -> Result<PUDataset> {
        let n = self.ids.len();
        PUDataset::new(self.ids, self.features, vec![false; n], Some(self.labels))
    }
}

/// Draw ⌊πn⌉ positive rows from N(+v, σ²I) and the rest from N(−v, σ²I).
/// Row ids are 0..n, positives first. Deterministic per seed.
pub fn gen_two_gaussians(config: &GaussianConfig, seed: u64) -> Result<LabeledData> {
    let n_pos = (config.pi * config.n as f64).round() as usize;
    let n_neg = config.n - n_pos;
    if n_pos < 1 || n_neg < 1 {
        return Err(Error::DegenerateClass(format!(
            "pi = {} with n = {} leaves a class empty ({} positive, {} negative)",
            config.pi, config.n, n_pos, n_neg
        )));
    }

    let mut rng = rng_from_seed(seed);
    let mut bm = BoxMuller::new();
    let mut features = Vec::with_capacity(config.n);
    let mut labels = Vec::with_capacity(config.n);
    for row in 0..config.n {
        let positive = row < n_pos;
        let mut x = Vec::with_capacity(config.dim);
        for d in 0..config.dim {
            let mean = if positive {
                config.direction[d]
            } else {
                -config.direction[d]
            };
            x.push(mean + config.sigma * bm.sample(&mut rng));
        }
        features.push(x);
        labels.push(if positive { 0 } else { 1 });
    }
    Ok(LabeledData {
        ids: (0..config.n as u64).collect(),
        features,
        labels,
    })
}

/// Feature matrix with a labeled-positive mask and optional hidden truth.
///
/// Hidden labels are private; training code sees only features and the mask,
/// and evaluation goes through [`PUDataset::hidden_truth`].
#[derive(Debug, Clone, PartialEq)]
pub struct PUDataset {
    ids: Vec<u64>,
    features: Vec<Vec<f64>>,
    labeled_positive: Vec<bool>,
    hidden_labels: Option<Vec<u8>>,
}

impl PUDataset {
    pub fn new(
        ids: Vec<u64>,
        features: Vec<Vec<f64>>,
        labeled_positive: Vec<bool>,
        hidden_labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let n = ids.len();
        if features.len() != n || labeled_positive.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                got: features.len().min(labeled_positive.len()),
            });
        }
        if let Some(labels) = &hidden_labels {
            if labels.len() != n {
                return Err(Error::ShapeMismatch {
                    expected: n,
                    got: labels.len(),
                });
            }
            for (i, (&labeled, &label)) in labeled_positive.iter().zip(labels.iter()).enumerate() {
                if label > 1 {
                    return Err(Error::Config(format!("row {i}: label must be 0 or 1")));
                }
                if labeled && label != 0 {
                    return Err(Error::Config(format!(
                        "row {i}: labeled-positive row has hidden label {label}"
                    )));
                }
            }
        }
        let dim = features.first().map(Vec::len).unwrap_or(0);
        for (i, row) in features.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::ShapeMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        what: "feature",
                        value: v,
                    });
                }
            }
            let _ = i;
        }
        Ok(Self {
            ids,
            features,
            labeled_positive,
            hidden_labels,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map(Vec::len).unwrap_or(0)
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labeled_mask(&self) -> &[bool] {
        &self.labeled_positive
    }

    /// Row indices of the labeled positives, in dataset order.
    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labeled_positive[i]).collect()
    }

    /// Row indices of the unlabeled set, in dataset order.
    pub fn unlabeled_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.labeled_positive[i]).collect()
    }

    /// True labels, for evaluation only. Training never reads these.
    pub fn hidden_truth(&self) -> Option<&[u8]> {
        self.hidden_labels.as_deref()
    }
}

/// SCAR split: promote `n_labeled` uniformly chosen true positives to the
/// labeled set; every other row becomes unlabeled with its truth retained for
/// evaluation.
pub fn make_pu_split(data: &LabeledData, n_labeled: usize, seed: u64) -> Result<PUDataset> {
    let positives: Vec<usize> = (0..data.labels.len())
        .filter(|&i| data.labels[i] == 0)
        .collect();
    if n_labeled > positives.len() {
        return Err(Error::LabeledExceedsPositives {
            requested: n_labeled,
            available: positives.len(),
        });
    }
    let n_u = data.labels.len() - n_labeled;
    if n_u < 2 {
        return Err(Error::TooFewValues { need: 2, got: n_u });
    }

    // Partial Fisher–Yates over the positive index list.
    let mut rng = rng_from_seed(seed);
    let mut pool = positives;
    for i in 0..n_labeled {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    let mut mask = vec![false; data.labels.len()];
    for &row in &pool[..n_labeled] {
        mask[row] = true;
    }
    PUDataset::new(
        data.ids.clone(),
        data.features.clone(),
        mask,
        Some(data.labels.clone()),
    )
}

/// A balanced batch: equally many labeled positives and unlabeled rows.
#[derive(Debug, Clone)]
pub struct BatchPair {
    pub positive: Vec<Vec<f64>>,
    pub unlabeled: Vec<Vec<f64>>,
}

/// Single-epoch stream of balanced batches. See [`balanced_batches`].
pub struct BalancedBatches<'a> {
    pu: &'a PUDataset,
    positive_rows: Vec<usize>,
    unlabeled_rows: Vec<usize>,
    batch_size: usize,
    cursor: usize,
    rng: rand_chacha::ChaCha8Rng,
}

impl<'a> BalancedBatches<'a> {
    /// Remaining pairs in this epoch.
    pub fn remaining(&self) -> usize {
        (self.unlabeled_rows.len() - self.cursor) / self.batch_size
    }
}

impl<'a> Iterator for BalancedBatches<'a> {
    type Item = BatchPair;

    fn next(&mut self) -> Option<BatchPair> {
        if self.cursor + self.batch_size > self.unlabeled_rows.len() {
            return None; // final short chunk is dropped
        }
        let unlabeled: Vec<Vec<f64>> = self.unlabeled_rows
            [self.cursor..self.cursor + self.batch_size]
            .iter()
            .map(|&row| self.pu.features()[row].clone())
            .collect();
        self.cursor += self.batch_size;
        let positive: Vec<Vec<f64>> = (0..self.batch_size)
            .map(|_| {
                let k = self.rng.gen_range(0..self.positive_rows.len());
                self.pu.features()[self.positive_rows[k]].clone()
            })
            .collect();
        Some(BatchPair { positive, unlabeled })
    }
}

/// One epoch of balanced batches: a seeded shuffle of the unlabeled rows in
/// chunks of `batch_size` (final short chunk dropped), each paired with
/// `batch_size` labeled positives drawn uniformly with replacement.
pub fn balanced_batches(
    pu: &PUDataset,
    batch_size: usize,
    epoch_seed: u64,
) -> Result<BalancedBatches<'_>> {
    balanced_batches_with_positives(pu, pu.labeled_indices(), batch_size, epoch_seed)
}

/// Like [`balanced_batches`] but resampling from an explicit positive row
/// subset (the pipeline holds out validation positives this way).
pub fn balanced_batches_with_positives(
    pu: &PUDataset,
    positive_rows: Vec<usize>,
    batch_size: usize,
    epoch_seed: u64,
) -> Result<BalancedBatches<'_>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    if positive_rows.is_empty() {
        return Err(Error::DegenerateClass("no labeled positives".into()));
    }
    let mut unlabeled_rows = pu.unlabeled_indices();
    if unlabeled_rows.len() < batch_size {
        return Err(Error::BatchTooLarge {
            batch_size,
            unlabeled: unlabeled_rows.len(),
        });
    }
    let mut rng = rng_from_seed(epoch_seed);
    shuffle(&mut unlabeled_rows, &mut rng);
    Ok(BalancedBatches {
        pu,
        positive_rows,
        unlabeled_rows,
        batch_size,
        cursor: 0,
        rng,
    })
}

/// Format an f64 as shortest round-trip decimal (well above the 9 significant
/// digits the schema requires; parses back bit-exact).
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Write the dataset schema: `id,label,labeled,f0,f1,...` with `label` in
/// {0, 1, NA}.
pub fn save_csv(pu: &PUDataset, path: &Path) -> Result<()> {
    let dim = pu.dim();
    let mut out = String::from("id,label,labeled");
    for d in 0..dim {
        out.push_str(&format!(",f{d}"));
    }
    out.push('\n');
    for i in 0..pu.len() {
        out.push_str(&pu.ids[i].to_string());
        out.push(',');
        match &pu.hidden_labels {
            Some(labels) => out.push_str(&labels[i].to_string()),
            None => out.push_str("NA"),
        }
        out.push(',');
        out.push_str(if pu.labeled_positive[i] { "1" } else { "0" });
        for v in &pu.features[i] {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a dataset written by [`save_csv`]. The `label` column may be absent
/// (header `id,labeled,f0,...`) or entirely NA; either yields a dataset
/// without hidden labels. Parse errors name the offending line.
pub fn load_csv(path: &Path) -> Result<PUDataset> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    let has_label = match cols.as_slice() {
        ["id", "label", "labeled", rest @ ..] if !rest.is_empty() => true,
        ["id", "labeled", rest @ ..] if !rest.is_empty() => false,
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("malformed header {header:?}"),
            })
        }
    };
    let feature_cols = &cols[if has_label { 3 } else { 2 }..];
    for (d, name) in feature_cols.iter().enumerate() {
        if *name != format!("f{d}") {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected feature column f{d}, found {name:?}"),
            });
        }
    }
    let dim = feature_cols.len();
    let width = cols.len();

    let mut ids = Vec::new();
    let mut features = Vec::new();
    let mut mask = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    let mut saw_na = false;
    let mut saw_label = false;

    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != width {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {width} columns, got {}", cells.len()),
            });
        }
        let mut cursor = cells.iter();
        let id: u64 = cursor
            .next()
            .unwrap()
            .parse()
            .map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad id {:?}", cells[0]),
            })?;
        if has_label {
            let cell = *cursor.next().unwrap();
            if cell == "NA" {
                saw_na = true;
            } else {
                saw_label = true;
                let label: u8 = cell.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad label {cell:?}"),
                })?;
                if label > 1 {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("label must be 0, 1 or NA, got {cell:?}"),
                    });
                }
                labels.push(label);
            }
            if saw_na && saw_label {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "label column mixes NA with 0/1".into(),
                });
            }
        }
        let labeled_cell = *cursor.next().unwrap();
        let labeled = match labeled_cell {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("labeled must be 0 or 1, got {other:?}"),
                })
            }
        };
        let mut row = Vec::with_capacity(dim);
        for cell in cursor {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad number {cell:?}"),
            })?;
            row.push(v);
        }
        ids.push(id);
        features.push(row);
        mask.push(labeled);
    }

    let hidden = if has_label && saw_label {
        Some(labels)
    } else {
        None
    };
    PUDataset::new(ids, features, mask, hidden)
}
