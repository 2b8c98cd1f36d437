//! Self-check suites behind the CLI's `verify` subcommand.
//!
//! Each suite exercises a dual route: the fast natural-break against the
//! exhaustive oracle, analytic gradients against central finite differences,
//! the hyperplane formulas against numeric root finding, and the
//! concentration bound against Monte Carlo coverage. Failures echo the
//! inputs needed to reproduce the case.

use rand::Rng;

use crate::jenks::{natural_break_fast, natural_break_oracle};
use crate::model::{backward, batch_loss, ModelParams, ModelSpec};
use crate::rng::{derive_seed, rng_from_seed, BoxMuller};
use crate::theory::{
    concentration_experiment, g_pu, hyperplane_offset, ConcentrationConfig, HyperplaneSetting,
};

/// Outcome of one verification property.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn pass(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: true,
            detail: detail.into(),
        }
    }

    fn fail(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: false,
            detail: detail.into(),
        }
    }
}

fn echo_values(values: &[f64]) -> String {
    if values.len() <= 16 {
        format!("{values:?}")
    } else {
        format!("n = {}, first 8 = {:?}", values.len(), &values[..8])
    }
}

/// Random natural-break input: alternating uniform and bimodal shapes.
fn jenks_input(trial: usize, max_n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(derive_seed(seed, trial as u64));
    let n = rng.gen_range(2..=max_n);
    let mut bm = BoxMuller::new();
    if trial % 2 == 0 {
        (0..n).map(|_| rng.gen::<f64>() * 10.0 - 5.0).collect()
    } else {
        let gap = 1.0 + rng.gen::<f64>() * 9.0;
        let spread = 0.2 + rng.gen::<f64>();
        (0..n)
            .map(|_| {
                let center = if rng.gen::<f64>() < 0.5 { 0.0 } else { gap };
                center + spread * bm.sample(&mut rng)
            })
            .collect()
    }
}

/// From-scratch two-pass objective at split `b` of ascending-sorted values.
fn recompute_objective(sorted: &[f64], b: usize) -> f64 {
    let cost = |part: &[f64]| {
        let mean = part.iter().sum::<f64>() / part.len() as f64;
        part.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / part.len() as f64
    };
    cost(&sorted[..b]) + cost(&sorted[b..])
}

/// Fast natural break vs. the exhaustive oracle on random inputs.
pub fn verify_jenks(trials: usize, max_n: usize, seed: u64) -> Vec<CheckOutcome> {
    let mut matches = 0usize;
    for trial in 0..trials {
        let values = jenks_input(trial, max_n, seed);
        let fast = natural_break_fast(&values).expect("valid input");
        let oracle = natural_break_oracle(&values).expect("valid input");

        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let scale = oracle.objective.abs().max(1.0);
        if (fast.objective - oracle.objective).abs() > 1e-9 * scale {
            return vec![CheckOutcome::fail(
                "jenks-oracle-equivalence",
                format!(
                    "trial {trial}: objectives diverge, fast {} vs oracle {} on {}",
                    fast.objective,
                    oracle.objective,
                    echo_values(&values)
                ),
            )];
        }
        if fast.break_index != oracle.break_index {
            // Near-exact ties may legitimately resolve differently; both
            // split objectives must then agree to 1e-12.
            let at_fast = recompute_objective(&sorted, fast.break_index);
            let at_oracle = recompute_objective(&sorted, oracle.break_index);
            if (at_fast - at_oracle).abs() > 1e-12 * scale {
                return vec![CheckOutcome::fail(
                    "jenks-oracle-equivalence",
                    format!(
                        "trial {trial}: break {} vs {} without a tie on {}",
                        fast.break_index,
                        oracle.break_index,
                        echo_values(&values)
                    ),
                )];
            }
        } else {
            matches += 1;
        }
        let recomputed = recompute_objective(&sorted, fast.break_index);
        if (fast.objective - recomputed).abs() > 1e-9 * scale {
            return vec![CheckOutcome::fail(
                "jenks-recomputation",
                format!(
                    "trial {trial}: running-statistics objective {} vs two-pass {} on {}",
                    fast.objective,
                    recomputed,
                    echo_values(&values)
                ),
            )];
        }
    }
    vec![CheckOutcome::pass(
        "jenks-oracle-equivalence",
        format!("{matches}/{trials} exact break matches (rest tied within 1e-12)"),
    )]
}

fn random_rows(rng: &mut impl Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect())
        .collect()
}

/// Analytic gradients vs. central finite differences on random fixtures,
/// alternating logistic regression and a two-hidden-layer MLP.
pub fn verify_gradients(fixtures: usize, seed: u64) -> Vec<CheckOutcome> {
    let mut worst = 0.0f64;
    for fixture in 0..fixtures {
        let mut rng = rng_from_seed(derive_seed(seed, fixture as u64));
        let dim = rng.gen_range(2..=6);
        let hidden = if fixture % 2 == 0 {
            vec![]
        } else {
            vec![rng.gen_range(3..=6), rng.gen_range(2..=5)]
        };
        let spec = ModelSpec::new(dim, hidden).expect("valid spec");
        let params = ModelParams::init(&spec, derive_seed(seed, 1000 + fixture as u64));
        let n_pos = rng.gen_range(1..=5);
        let n_unl = rng.gen_range(1..=5);
        let pos = random_rows(&mut rng, n_pos, dim);
        let unl = random_rows(&mut rng, n_unl, dim);
        let grads = backward(&params, &pos, &unl).expect("gradient");

        for idx in 0..params.flat_len() {
            let h = 1e-5;
            let base = params.get_flat(idx);
            let mut plus = params.clone();
            plus.set_flat(idx, base + h);
            let mut minus = params.clone();
            minus.set_flat(idx, base - h);
            let fd = (batch_loss(&plus, &pos, &unl).unwrap()
                - batch_loss(&minus, &pos, &unl).unwrap())
                / (2.0 * h);
            let an = grads.get_flat(idx);
            let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-8);
            worst = worst.max(rel);
            if rel >= 1e-4 {
                return vec![CheckOutcome::fail(
                    "gradient-finite-difference",
                    format!(
                        "fixture {fixture} (dim {dim}, spec {:?}), param {idx}: \
                         analytic {an} vs central-difference {fd}, rel err {rel:.3e}",
                        params.spec()
                    ),
                )];
            }
        }
    }
    vec![CheckOutcome::pass(
        "gradient-finite-difference",
        format!("{fixtures} fixtures, max relative error {worst:.3e}"),
    )]
}

fn random_setting(rng: &mut impl Rng, ratio: f64) -> HyperplaneSetting {
    let dim = rng.gen_range(1..=16);
    let mut bm = BoxMuller::new();
    let mut v: Vec<f64> = (0..dim).map(|_| bm.sample(rng)).collect();
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= norm.max(1e-12);
    }
    let sigma = 0.2 + rng.gen::<f64>() * 2.3;
    let pi = 0.05 + rng.gen::<f64>() * 0.9;
    HyperplaneSetting::new(v, sigma, pi, ratio).expect("valid setting")
}

/// Numeric root of g_pu along the class axis by bisection (g_pu is strictly
/// increasing along v).
fn g_pu_root_along_v(setting: &HyperplaneSetting) -> f64 {
    let s2 = setting.sigma * setting.sigma;
    let eval = |s: f64| {
        let x: Vec<f64> = setting.direction.iter().map(|v| v * s).collect();
        g_pu(&x, setting)
    };
    let mut lo = -20.0 * s2;
    let mut hi = 20.0 * s2;
    debug_assert!(eval(lo) < 0.0 && eval(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Hyperplane identities: zero offset at unit ratio, numeric root agreement,
/// the unlearnable region, and overflow safety.
pub fn verify_hyperplane(settings: usize, seed: u64) -> Vec<CheckOutcome> {
    let mut outcomes = Vec::new();
    let mut max_offset = 0.0f64;
    let mut max_root = 0.0f64;
    for k in 0..settings {
        let mut rng = rng_from_seed(derive_seed(seed, k as u64));
        let setting = random_setting(&mut rng, 1.0);

        match hyperplane_offset(&setting) {
            Ok(offset) => {
                max_offset = max_offset.max(offset.abs());
                if offset.abs() > 1e-12 {
                    outcomes.push(CheckOutcome::fail(
                        "hyperplane-offset-unit-ratio",
                        format!(
                            "setting {k} (sigma {}, pi {}): offset {offset} at r = 1",
                            setting.sigma, setting.pi
                        ),
                    ));
                    return outcomes;
                }
            }
            Err(e) => {
                outcomes.push(CheckOutcome::fail(
                    "hyperplane-offset-unit-ratio",
                    format!("setting {k}: unexpected error {e}"),
                ));
                return outcomes;
            }
        }

        let root = g_pu_root_along_v(&setting);
        max_root = max_root.max(root.abs());
        if root.abs() > 1e-9 {
            outcomes.push(CheckOutcome::fail(
                "hyperplane-gpu-root",
                format!(
                    "setting {k} (sigma {}, pi {}): numeric root {root} not at origin",
                    setting.sigma, setting.pi
                ),
            ));
            return outcomes;
        }

        // r at or below pi must be rejected.
        for ratio in [setting.pi, setting.pi * 0.8] {
            let bad = HyperplaneSetting::new(
                setting.direction.clone(),
                setting.sigma,
                setting.pi,
                ratio,
            )
            .expect("valid setting");
            if hyperplane_offset(&bad).is_ok() {
                outcomes.push(CheckOutcome::fail(
                    "hyperplane-unlearnable",
                    format!("setting {k}: r = {ratio} <= pi = {} accepted", setting.pi),
                ));
                return outcomes;
            }
        }

        // Log-sum-exp evaluation stays finite deep in both tails.
        let s2 = setting.sigma * setting.sigma;
        for sign in [-1.0, 1.0] {
            let s = sign * 1e4 * s2;
            let x: Vec<f64> = setting.direction.iter().map(|v| v * s).collect();
            let g = g_pu(&x, &setting);
            if !g.is_finite() {
                outcomes.push(CheckOutcome::fail(
                    "hyperplane-overflow",
                    format!("setting {k}: g_pu not finite at projection {s}"),
                ));
                return outcomes;
            }
        }
    }
    outcomes.push(CheckOutcome::pass(
        "hyperplane-offset-unit-ratio",
        format!("{settings} settings, max |offset| {max_offset:.3e}"),
    ));
    outcomes.push(CheckOutcome::pass(
        "hyperplane-gpu-root",
        format!("max |numeric root| {max_root:.3e}"),
    ));
    outcomes.push(CheckOutcome::pass(
        "hyperplane-unlearnable",
        "r <= pi rejected in every setting",
    ));
    outcomes.push(CheckOutcome::pass(
        "hyperplane-overflow",
        "finite g_pu at |v.x|/sigma^2 = 1e4",
    ));
    outcomes
}

/// Monte Carlo coverage of the concentration bound at t in {10, 20, 40},
/// plus the O(1/t) shrink of the median deviation.
pub fn verify_concentration(epsilon: f64, trials: usize, seed: u64) -> Vec<CheckOutcome> {
    let mut outcomes = Vec::new();
    let mut medians = Vec::new();
    for (k, t) in [10usize, 20, 40].into_iter().enumerate() {
        let config = ConcentrationConfig {
            t,
            alpha: 2.0,
            mu: 0.1,
            sigma_d: 0.2,
            epsilon,
            trials,
            seed: derive_seed(seed, k as u64),
        };
        match concentration_experiment(&config) {
            Ok(report) => {
                let floor = 1.0 - 2.0 * epsilon;
                if report.coverage < floor {
                    outcomes.push(CheckOutcome::fail(
                        format!("concentration-coverage-t{t}"),
                        format!(
                            "coverage {} below 1 - 2eps = {floor} (config {config:?})",
                            report.coverage
                        ),
                    ));
                    return outcomes;
                }
                outcomes.push(CheckOutcome::pass(
                    format!("concentration-coverage-t{t}"),
                    format!(
                        "coverage {:.4} >= {floor:.2}, bound {:.4}, median deviation {:.5}",
                        report.coverage, report.bound, report.median_deviation
                    ),
                ));
                medians.push(report.median_deviation);
            }
            Err(e) => {
                outcomes.push(CheckOutcome::fail(
                    format!("concentration-coverage-t{t}"),
                    format!("experiment failed: {e} (config {config:?})"),
                ));
                return outcomes;
            }
        }
    }
    let (coarse, fine) = (medians[0], medians[2]);
    if coarse >= 2.0 * fine {
        outcomes.push(CheckOutcome::pass(
            "concentration-rate",
            format!("median deviation {coarse:.5} at t=10 vs {fine:.5} at t=40"),
        ));
    } else {
        outcomes.push(CheckOutcome::fail(
            "concentration-rate",
            format!(
                "median deviation shrank only {coarse:.5} -> {fine:.5} from t=10 to t=40"
            ),
        ));
    }
    outcomes
}
