//! Seeded randomness helpers.
//!
//! Every stochastic component takes an explicit `u64` seed and expands it
//! through ChaCha8, so runs are reproducible across platforms. Sub-streams
//! (per epoch, per trial) are derived with a SplitMix64 step rather than by
//! seed arithmetic, which keeps nearby master seeds statistically independent.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive an independent stream seed from a master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    // SplitMix64 finalizer over the combined state.
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// ChaCha8 stream for a seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal sampler via Box–Muller with a cached spare.
///
/// Box–Muller (rather than a library ziggurat) keeps the exact sample stream
/// under this crate's control, so recorded datasets never shift underneath a
/// dependency upgrade.
#[derive(Debug, Clone)]
pub struct BoxMuller {
    spare: Option<f64>,
}

impl BoxMuller {
    pub fn new() -> Self {
        Self { spare: None }
    }

    pub fn sample<R: Rng>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] so the log is finite.
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

impl Default for BoxMuller {
    fn default() -> Self {
        Self::new()
    }
}

/// Fisher–Yates shuffle driven by the supplied RNG.
pub fn shuffle<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}
