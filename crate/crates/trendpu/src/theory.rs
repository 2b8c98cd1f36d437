//! Executable checks of the analytical claims.
//!
//! Two families of claims are made testable:
//!
//! 1. **Bayesian decision hyperplanes** for the two-Gaussian setting. The
//!    PN log-odds score [`g_pn`] and the PU score [`g_pu`] (trained against
//!    the unlabeled mixture under the negativity assumption) have closed
//!    forms, and the PU hyperplane crosses the class axis at
//!    [`hyperplane_offset`]: s = −σ²(ln(r − π) − ln(1 − π))/2 with
//!    r = |P|/|U|. At r = 1 the offset vanishes, i.e. balanced resampling
//!    recovers the ideal balanced-PN hyperplane; at r ≤ π the hyperplane is
//!    unlearnable.
//!
//! 2. **Concentration of the robust trend score.** With probability at least
//!    1 − 2ε, |Ŝ − α·E[Δp]| stays below a bound of order
//!    √(log ε⁻¹) / t. [`concentration_experiment`] checks the bound by Monte
//!    Carlo: i.i.d. Gaussian ordered differences, Ŝ computed as the mean of
//!    ψ(α·Δp), coverage reported against 1 − 2ε. The proof actually concerns
//!    an M-estimator; the experiment deliberately checks the plug-in
//!    estimator the pipeline uses, and also records the gap |α·S̃ − Ŝ| that
//!    the proof's restatement bounds.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, BoxMuller};
use crate::tpp_stats::psi_raw;

/// Geometry of the two-Gaussian PU setting.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneSetting {
    /// Unit vector; class means are ±v.
    pub direction: Vec<f64>,
    pub sigma: f64,
    /// Positive class prior in (0, 1).
    pub pi: f64,
    /// Labeled-to-unlabeled ratio |P|/|U|.
    pub ratio: f64,
}

impl HyperplaneSetting {
    pub fn new(direction: Vec<f64>, sigma: f64, pi: f64, ratio: f64) -> Result<Self> {
        let norm: f64 = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "direction must be a unit vector, |v| = {norm}"
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        if !(0.0 < pi && pi < 1.0) {
            return Err(Error::Config(format!("pi must be in (0, 1), got {pi}")));
        }
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(Error::Config(format!("ratio must be positive, got {ratio}")));
        }
        Ok(Self {
            direction,
            sigma,
            pi,
            ratio,
        })
    }

    fn project(&self, x: &[f64]) -> f64 {
        assert_eq!(
            x.len(),
            self.direction.len(),
            "point dimension must match the setting"
        );
        x.iter().zip(&self.direction).map(|(a, b)| a * b).sum()
    }
}

/// PN log-odds score: 2vᵀx/σ² + ln(π/(1−π)). Its zero set is the
/// Bayes-optimal positive-vs-negative hyperplane.
pub fn g_pn(x: &[f64], setting: &HyperplaneSetting) -> f64 {
    2.0 * setting.project(x) / (setting.sigma * setting.sigma)
        + (setting.pi / (1.0 - setting.pi)).ln()
}

/// PU score under the negativity assumption:
/// −ln[(1−π)·exp(−2vᵀx/σ²) + π] + ln(|P|/|U|), evaluated in log-sum-exp form
/// so large |vᵀx|/σ² cannot overflow.
pub fn g_pu(x: &[f64], setting: &HyperplaneSetting) -> f64 {
    let a = -2.0 * setting.project(x) / (setting.sigma * setting.sigma);
    let log_terms = [a + (1.0 - setting.pi).ln(), setting.pi.ln()];
    let m = log_terms[0].max(log_terms[1]);
    let lse = m + ((log_terms[0] - m).exp() + (log_terms[1] - m).exp()).ln();
    -lse + setting.ratio.ln()
}

/// Signed offset s along v where the PU hyperplane crosses (x = s·v):
/// s = −σ²(ln(r − π) − ln(1 − π))/2. Requires r > π; otherwise the
/// hyperplane is unlearnable.
pub fn hyperplane_offset(setting: &HyperplaneSetting) -> Result<f64> {
    if setting.ratio <= setting.pi {
        return Err(Error::UnlearnableHyperplane {
            ratio: setting.ratio,
            pi: setting.pi,
        });
    }
    let s2 = setting.sigma * setting.sigma;
    Ok(-s2 * ((setting.ratio - setting.pi).ln() - (1.0 - setting.pi).ln()) / 2.0)
}

/// Configuration of the Monte Carlo concentration check.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationConfig {
    /// Snapshot count; the trial draws t(t−1)/2 ordered differences.
    pub t: usize,
    pub alpha: f64,
    /// True mean of Δp.
    pub mu: f64,
    /// Standard deviation of Δp.
    pub sigma_d: f64,
    /// Tail probability; the bound holds with probability ≥ 1 − 2ε.
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
}

/// One Monte Carlo trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// |Ŝ − α·μ|.
    pub deviation: f64,
    pub inside: bool,
    /// |α·S̃ − Ŝ|, the quantity bounded by the proof's restatement.
    pub stilde_gap: f64,
}

/// Aggregated coverage report.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    pub bound: f64,
    pub coverage: f64,
    pub median_deviation: f64,
    pub median_stilde_gap: f64,
    pub trials: Vec<TrialOutcome>,
}

impl ConcentrationReport {
    /// CSV form: `trial,deviation,bound,inside` rows plus a summary row
    /// carrying (median deviation, bound, coverage).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,deviation,bound,inside\n");
        for (i, trial) in self.trials.iter().enumerate() {
            out.push_str(&format!(
                "{i},{},{},{}\n",
                trial.deviation,
                self.bound,
                u8::from(trial.inside)
            ));
        }
        out.push_str(&format!(
            "summary,{},{},{}\n",
            self.median_deviation, self.bound, self.coverage
        ));
        out
    }
}

/// The deviation bound 2ασ√(2·ln(ε⁻¹)/(t(t−1))) / (1 − √(2·ln(ε⁻¹)/(t(t−1)α²σ²))).
///
/// Valid only when the radicand in the denominator is below 1.
pub fn theorem_bound(t: usize, alpha: f64, sigma: f64, epsilon: f64) -> Result<f64> {
    if t < 2 {
        return Err(Error::Config(format!("t must be at least 2, got {t}")));
    }
    if !(0.0 < epsilon && epsilon < 0.5) {
        return Err(Error::Config(format!(
            "epsilon must be in (0, 0.5), got {epsilon}"
        )));
    }
    if !(alpha.is_finite() && alpha > 0.0) || !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Config("alpha and sigma must be positive".into()));
    }
    let pairs = (t * (t - 1)) as f64;
    let log_term = 2.0 * (1.0 / epsilon).ln();
    let radicand = log_term / (pairs * alpha * alpha * sigma * sigma);
    if radicand >= 1.0 {
        return Err(Error::BoundPrecondition {
            quantity: "2·ln(1/eps)/(t(t-1)·alpha²·sigma²)",
            value: radicand,
        });
    }
    let numerator = 2.0 * alpha * sigma * (log_term / pairs).sqrt();
    Ok(numerator / (1.0 - radicand.sqrt()))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite deviations"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Monte Carlo check of the concentration bound.
///
/// Per trial, draws t(t−1)/2 independent Δp ~ N(μ, σ_d²), computes the
/// plug-in Ŝ = mean ψ(α·Δp), and tests |Ŝ − α·μ| against [`theorem_bound`].
/// Trials use derived per-trial seeds, so aggregation is order-independent.
pub fn concentration_experiment(config: &ConcentrationConfig) -> Result<ConcentrationReport> {
    if config.trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    if !config.mu.is_finite() || !(config.sigma_d.is_finite() && config.sigma_d > 0.0) {
        return Err(Error::Config("mu must be finite and sigma_d positive".into()));
    }
    let bound = theorem_bound(config.t, config.alpha, config.sigma_d, config.epsilon)?;
    let pairs = config.t * (config.t - 1) / 2;

    let mut trials = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let mut rng = rng_from_seed(derive_seed(config.seed, trial as u64));
        let mut bm = BoxMuller::new();
        let mut psi_sum = 0.0;
        let mut raw_sum = 0.0;
        for _ in 0..pairs {
            let dp = config.mu + config.sigma_d * bm.sample(&mut rng);
            psi_sum += psi_raw(config.alpha * dp);
            raw_sum += dp;
        }
        let s_hat = psi_sum / pairs as f64;
        let s_tilde = raw_sum / pairs as f64;
        let deviation = (s_hat - config.alpha * config.mu).abs();
        trials.push(TrialOutcome {
            deviation,
            inside: deviation < bound,
            stilde_gap: (config.alpha * s_tilde - s_hat).abs(),
        });
    }

    let coverage =
        trials.iter().filter(|t| t.inside).count() as f64 / trials.len() as f64;
    let mut deviations: Vec<f64> = trials.iter().map(|t| t.deviation).collect();
    let mut gaps: Vec<f64> = trials.iter().map(|t| t.stilde_gap).collect();
    Ok(ConcentrationReport {
        bound,
        coverage,
        median_deviation: median(&mut deviations),
        median_stilde_gap: median(&mut gaps),
        trials,
    })
}
