//! Seeded randomness helpers.
//!
//! All randomized routines in this crate take an explicit seed and derive
//! per-task streams from it, so results are reproducible and independent of
//! the degree of parallelism.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Deterministic RNG from a master seed.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derived stream for sub-task `index` (Monte Carlo draw, study row, trial).
///
/// Uses the ChaCha stream id so streams are statistically independent and do
/// not depend on how work is split across threads.
pub fn derived(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// Vector of i.i.d. standard normal entries.
pub fn standard_normal_vector(n: usize, rng: &mut ChaCha8Rng) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Random orthogonal matrix: QR of a standard-normal matrix with the signs
/// of the R diagonal fixed, which makes the factor unique and the draw
/// reproducible.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let gauss = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}
