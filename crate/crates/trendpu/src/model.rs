//! Minimal differentiable binary classifiers.
//!
//! A [`ModelSpec`] describes logistic regression (no hidden layers) or a
//! small multilayer perceptron with rectifier hidden units and a single
//! sigmoid output. The output `q` is the predicted probability of class 1
//! (the negative class: labeled positives carry label 0, unlabeled examples
//! are trained toward label 1). Recorded trace scores are `p = 1 − q`, the
//! positive-class probability, so traces of true negatives decrease as
//! training fits the negativity assumption.
//!
//! Gradients are analytic backpropagation of the resampling loss
//!
//! ```text
//!   L = mean CE(q, 0) over the positive batch + mean CE(q, 1) over the
//!       unlabeled batch
//! ```
//!
//! and are checked against central finite differences by the verification
//! suite. Optimization is plain Adam with bias correction.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Clamp applied to `q` before logarithms in the loss. Gradients use the
/// unclamped value.
pub const LOSS_CLIP: f64 = 1e-7;

/// Architecture of a classifier: input width and hidden widths.
/// Empty `hidden_dims` is logistic regression.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
}

impl ModelSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Config("input_dim must be at least 1".into()));
        }
        if hidden_dims.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(Self {
            input_dim,
            hidden_dims,
        })
    }

    /// (in, out) dimensions of every layer, output layer last.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, 1));
        dims
    }
}

/// Per-layer weights (row-major, out × in) and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    spec: ModelSpec,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Gradient of the loss with respect to every parameter, same shapes as
/// [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Numerically stable sigmoid, saturated to the nearest representable values
/// strictly inside (0, 1).
fn sigmoid(z: f64) -> f64 {
    let q = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    q.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

impl ModelParams {
    /// Seeded initialization: every weight and bias uniform in
    /// [−1/√fan_in, +1/√fan_in] for its layer.
    pub fn init(spec: &ModelSpec, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (in_dim, out_dim) in spec.layer_dims() {
            let bound = 1.0 / (in_dim as f64).sqrt();
            let w: Vec<f64> = (0..in_dim * out_dim)
                .map(|_| rng.gen::<f64>() * 2.0 * bound - bound)
                .collect();
            let b: Vec<f64> = (0..out_dim)
                .map(|_| rng.gen::<f64>() * 2.0 * bound - bound)
                .collect();
            weights.push(w);
            biases.push(b);
        }
        Self {
            spec: spec.clone(),
            weights,
            biases,
        }
    }

    /// All-zero parameters (sigmoid(0) = 0.5 everywhere); mostly for tests.
    pub fn zeros(spec: &ModelSpec) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (in_dim, out_dim) in spec.layer_dims() {
            weights.push(vec![0.0; in_dim * out_dim]);
            biases.push(vec![0.0; out_dim]);
        }
        Self {
            spec: spec.clone(),
            weights,
            biases,
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.input_dim {
            return Err(Error::ShapeMismatch {
                expected: self.spec.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Forward pass keeping every layer's post-activation for backprop.
    /// Returns (activations per layer including the input, output q).
    fn forward_cached(&self, x: &[f64]) -> (Vec<Vec<f64>>, f64) {
        let n_layers = self.weights.len();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        acts.push(x.to_vec());
        for l in 0..n_layers {
            let input = &acts[l];
            let in_dim = input.len();
            let out_dim = self.biases[l].len();
            let mut out = Vec::with_capacity(out_dim);
            for r in 0..out_dim {
                let row = &self.weights[l][r * in_dim..(r + 1) * in_dim];
                let z: f64 = row
                    .iter()
                    .zip(input.iter())
                    .map(|(w, a)| w * a)
                    .sum::<f64>()
                    + self.biases[l][r];
                if l + 1 == n_layers {
                    out.push(z); // output logit, sigmoid applied by caller
                } else {
                    out.push(z.max(0.0)); // rectifier
                }
            }
            acts.push(out);
        }
        let logit = acts.last().expect("output layer")[0];
        (acts, sigmoid(logit))
    }

    /// Total number of scalar parameters.
    pub fn flat_len(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Read parameter `idx` in the flat layout
    /// (layer 0 weights, layer 0 biases, layer 1 weights, ...).
    pub fn get_flat(&self, idx: usize) -> f64 {
        let mut i = idx;
        for l in 0..self.weights.len() {
            if i < self.weights[l].len() {
                return self.weights[l][i];
            }
            i -= self.weights[l].len();
            if i < self.biases[l].len() {
                return self.biases[l][i];
            }
            i -= self.biases[l].len();
        }
        panic!("flat index {idx} out of range");
    }

    /// Write parameter `idx` in the flat layout.
    pub fn set_flat(&mut self, idx: usize, value: f64) {
        let mut i = idx;
        for l in 0..self.weights.len() {
            if i < self.weights[l].len() {
                self.weights[l][i] = value;
                return;
            }
            i -= self.weights[l].len();
            if i < self.biases[l].len() {
                self.biases[l][i] = value;
                return;
            }
            i -= self.biases[l].len();
        }
        panic!("flat index {idx} out of range");
    }
}

impl Gradients {
    fn zeros_like(params: &ModelParams) -> Self {
        Self {
            weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Read gradient `idx` in the same flat layout as [`ModelParams::get_flat`].
    pub fn get_flat(&self, idx: usize) -> f64 {
        let mut i = idx;
        for l in 0..self.weights.len() {
            if i < self.weights[l].len() {
                return self.weights[l][i];
            }
            i -= self.weights[l].len();
            if i < self.biases[l].len() {
                return self.biases[l][i];
            }
            i -= self.biases[l].len();
        }
        panic!("flat index {idx} out of range");
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, g| m.max(g.abs()))
    }
}

/// Predicted probability of class 1 for one input.
pub fn forward(params: &ModelParams, x: &[f64]) -> Result<f64> {
    params.check_input(x)?;
    Ok(params.forward_cached(x).1)
}

/// Cross-entropy −[y ln q + (1−y) ln(1−q)] with q clamped to
/// [`LOSS_CLIP`, 1 − `LOSS_CLIP`] before the logarithm.
pub fn cross_entropy(q: f64, y: u8) -> f64 {
    let q = q.clamp(LOSS_CLIP, 1.0 - LOSS_CLIP);
    if y == 1 {
        -q.ln()
    } else {
        -(1.0 - q).ln()
    }
}

/// Resampling loss: mean cross-entropy of the positive batch toward label 0
/// plus mean cross-entropy of the unlabeled batch toward label 1.
///
/// Batch sizes may differ here (the sampler enforces balance upstream).
pub fn batch_loss(
    params: &ModelParams,
    positive_batch: &[Vec<f64>],
    unlabeled_batch: &[Vec<f64>],
) -> Result<f64> {
    if positive_batch.is_empty() || unlabeled_batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut pos = 0.0;
    for x in positive_batch {
        pos += cross_entropy(forward(params, x)?, 0);
    }
    let mut unl = 0.0;
    for x in unlabeled_batch {
        unl += cross_entropy(forward(params, x)?, 1);
    }
    Ok(pos / positive_batch.len() as f64 + unl / unlabeled_batch.len() as f64)
}

/// Mean cross-entropy of labeled rows (used by supervised retraining).
pub fn supervised_loss(params: &ModelParams, rows: &[Vec<f64>], labels: &[u8]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if rows.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    let mut total = 0.0;
    for (x, &y) in rows.iter().zip(labels) {
        total += cross_entropy(forward(params, x)?, y);
    }
    Ok(total / rows.len() as f64)
}

/// Backpropagate one example's cross-entropy into `grads`, scaled by `weight`.
/// For the sigmoid output the logit gradient is (q − target).
fn accumulate_example(
    params: &ModelParams,
    x: &[f64],
    target: f64,
    weight: f64,
    grads: &mut Gradients,
) -> Result<()> {
    params.check_input(x)?;
    let (acts, q) = params.forward_cached(x);
    let n_layers = params.weights.len();

    // delta[r] = dL/dz_r for the current layer, starting at the output logit.
    let mut delta = vec![(q - target) * weight];
    for l in (0..n_layers).rev() {
        let input = &acts[l];
        let in_dim = input.len();
        let out_dim = delta.len();
        for r in 0..out_dim {
            let d = delta[r];
            let row = &mut grads.weights[l][r * in_dim..(r + 1) * in_dim];
            for (g, a) in row.iter_mut().zip(input.iter()) {
                *g += d * a;
            }
            grads.biases[l][r] += d;
        }
        if l == 0 {
            break;
        }
        // Propagate through the rectifier of the layer below: its
        // post-activation is acts[l], zero wherever the unit was inactive.
        let mut next = vec![0.0; in_dim];
        for (c, slot) in next.iter_mut().enumerate() {
            if acts[l][c] > 0.0 {
                let mut sum = 0.0;
                for (r, d) in delta.iter().enumerate() {
                    sum += d * params.weights[l][r * in_dim + c];
                }
                *slot = sum;
            }
        }
        delta = next;
    }
    Ok(())
}

/// Analytic gradient of [`batch_loss`] with respect to every parameter.
pub fn backward(
    params: &ModelParams,
    positive_batch: &[Vec<f64>],
    unlabeled_batch: &[Vec<f64>],
) -> Result<Gradients> {
    if positive_batch.is_empty() || unlabeled_batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut grads = Gradients::zeros_like(params);
    let wp = 1.0 / positive_batch.len() as f64;
    for x in positive_batch {
        accumulate_example(params, x, 0.0, wp, &mut grads)?;
    }
    let wu = 1.0 / unlabeled_batch.len() as f64;
    for x in unlabeled_batch {
        accumulate_example(params, x, 1.0, wu, &mut grads)?;
    }
    Ok(grads)
}

/// Analytic gradient of [`supervised_loss`].
pub fn supervised_backward(
    params: &ModelParams,
    rows: &[Vec<f64>],
    labels: &[u8],
) -> Result<Gradients> {
    if rows.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if rows.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    let mut grads = Gradients::zeros_like(params);
    let w = 1.0 / rows.len() as f64;
    for (x, &y) in rows.iter().zip(labels) {
        accumulate_example(params, x, y as f64, w, &mut grads)?;
    }
    Ok(grads)
}

/// Adam moment accumulators and hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_biases: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ModelParams, learning_rate: f64) -> Result<Self> {
        if !learning_rate.is_finite() || learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m_weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

fn adam_update_block(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// One Adam update with bias correction. Deterministic; rejects shape
/// mismatches and non-finite gradients.
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if grads.weights.len() != params.weights.len() {
        return Err(Error::ShapeMismatch {
            expected: params.weights.len(),
            got: grads.weights.len(),
        });
    }
    for l in 0..params.weights.len() {
        if grads.weights[l].len() != params.weights[l].len()
            || grads.biases[l].len() != params.biases[l].len()
        {
            return Err(Error::ShapeMismatch {
                expected: params.weights[l].len(),
                got: grads.weights[l].len(),
            });
        }
        for &g in grads.weights[l].iter().chain(grads.biases[l].iter()) {
            if !g.is_finite() {
                return Err(Error::NonFinite {
                    what: "gradient",
                    value: g,
                });
            }
        }
    }

    state.step += 1;
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    for l in 0..params.weights.len() {
        adam_update_block(
            &mut params.weights[l],
            &grads.weights[l],
            &mut state.m_weights[l],
            &mut state.v_weights[l],
            state.learning_rate,
            state.beta1,
            state.beta2,
            state.epsilon,
            bc1,
            bc2,
        );
        adam_update_block(
            &mut params.biases[l],
            &grads.biases[l],
            &mut state.m_biases[l],
            &mut state.v_biases[l],
            state.learning_rate,
            state.beta1,
            state.beta2,
            state.epsilon,
            bc1,
            bc2,
        );
    }
    Ok(())
}

/// Positive-class probabilities p = 1 − q, one per feature row, in row order.
pub fn predict_scores(params: &ModelParams, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    features
        .iter()
        .map(|x| forward(params, x).map(|q| 1.0 - q))
        .collect()
}

/// Write a checkpoint: a `spec` header line followed by one `w`/`b` line per
/// layer, values in shortest round-trip decimal.
pub fn save_params(params: &ModelParams, path: &std::path::Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("spec");
    out.push(',');
    out.push_str(&params.spec.input_dim.to_string());
    for h in &params.spec.hidden_dims {
        out.push(',');
        out.push_str(&h.to_string());
    }
    out.push('\n');
    for l in 0..params.weights.len() {
        out.push_str(&format!("w,{l}"));
        for v in &params.weights[l] {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
        out.push_str(&format!("b,{l}"));
        for v in &params.biases[l] {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a checkpoint written by [`save_params`].
pub fn load_params(path: &std::path::Path) -> Result<ModelParams> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty checkpoint".into(),
    })?;
    let mut cells = header.split(',');
    if cells.next() != Some("spec") {
        return Err(Error::Parse {
            line: 1,
            msg: "expected spec header".into(),
        });
    }
    let dims: Vec<usize> = cells
        .map(|c| {
            c.parse::<usize>().map_err(|_| Error::Parse {
                line: 1,
                msg: format!("bad dimension {c:?}"),
            })
        })
        .collect::<Result<_>>()?;
    if dims.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "spec header needs an input dimension".into(),
        });
    }
    let spec = ModelSpec::new(dims[0], dims[1..].to_vec())?;
    let mut params = ModelParams::zeros(&spec);

    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let kind = cells.next().unwrap_or_default();
        let layer: usize = cells
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or(Error::Parse {
                line: line_no,
                msg: "missing layer index".into(),
            })?;
        if layer >= params.weights.len() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("layer {layer} out of range"),
            });
        }
        let values: Vec<f64> = cells
            .map(|c| {
                c.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad number {c:?}"),
                })
            })
            .collect::<Result<_>>()?;
        let slot = match kind {
            "w" => &mut params.weights[layer],
            "b" => &mut params.biases[layer],
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("unknown row kind {other:?}"),
                })
            }
        };
        if values.len() != slot.len() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} values, got {}", slot.len(), values.len()),
            });
        }
        *slot = values;
    }
    Ok(params)
}
