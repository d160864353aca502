use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::ProjectionSet;
use crate::linalg::Matrix2c;

/// Herald total used for "noiseless" records: counts are `round(p·N)`.
pub const NOISELESS_TOTAL: u64 = 1_000_000_000_000;

/// Counts for one state, one entry per projector in [`ProjectionSet`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub counts: [u64; 4],
    /// Heralded events per projector setting.
    pub total: u64,
    /// Seed of the sampler; `None` for noiseless records.
    pub seed: Option<u64>,
}

impl CountRecord {
    pub fn frequencies(&self) -> [f64; 4] {
        self.counts.map(|c| c as f64 / self.total as f64)
    }
}

/// `⟨k|ρ|k⟩` for each analysis state.
pub fn projection_probabilities(rho: &Matrix2c) -> [f64; 4] {
    ProjectionSet::states().map(|k| k.inner(&rho.apply(&k)).re)
}

pub fn simulate_counts(rho: &Matrix2c, total: u64, seed: u64) -> CountRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = projection_probabilities(rho).map(|p| {
        let p = p.clamp(0.0, 1.0);
        Binomial::new(total, p).expect("probability clamped to [0, 1]").sample(&mut rng)
    });
    CountRecord { counts, total, seed: Some(seed) }
}

pub fn noiseless_counts(rho: &Matrix2c) -> CountRecord {
    let n = NOISELESS_TOTAL as f64;
    let counts = projection_probabilities(rho).map(|p| (p.clamp(0.0, 1.0) * n).round() as u64);
    CountRecord { counts, total: NOISELESS_TOTAL, seed: None }
}

/// SplitMix64 step, used to give every time point its own reproducible seed.
fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One record per state; record `i` is sampled from a seed derived from
/// `(seed, i)` so any point can be regenerated on its own.
pub fn simulate_series(rhos: &[Matrix2c], total: u64, seed: u64) -> Vec<CountRecord> {
    rhos.iter()
        .enumerate()
        .map(|(i, rho)| simulate_counts(rho, total, mix_seed(seed, i as u64)))
        .collect()
}

/// Linear-inversion Stokes estimate. This is also the unconstrained maximum of
/// the binomial likelihood.
pub fn stokes_from_counts(record: &CountRecord) -> [f64; 3] {
    let [h, v, gp, gm] = record.frequencies();
    [2.0 * gp - 1.0, 1.0 - 2.0 * gm, h - v]
}
