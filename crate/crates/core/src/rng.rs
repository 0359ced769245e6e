//! Seeded random source.
//!
//! All randomness in the crate comes from ChaCha8 (`rand_chacha::ChaCha8Rng`),
//! seeded with `seed_from_u64`. ChaCha output is defined by the algorithm, not
//! the platform, so a seed fixes the draw sequence everywhere. Conversions to
//! reals are done here rather than through `rand` distributions so that they
//! are pinned as well:
//!
//! - uniform `[0, 1)`: the top 53 bits of one `u64` scaled by 2⁻⁵³
//! - standard normal: Box–Muller on two uniforms, cosine branch only

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Real};

#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `stream` for the same seed. Used to give each
    /// consumer (initialization, shuffling, ...) its own sequence so that
    /// adding draws in one place never shifts another.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn standard_normal(&mut self) -> f64 {
        // 1 - u lies in (0, 1], so the log is finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        mean + std_dev * self.standard_normal()
    }

    /// Uniform integer in `[0, bound)`. `bound` must be nonzero.
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        // Lemire's multiply-shift; bias is below 2⁻³² for any usize bound we use.
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// `m × n` matrix with entries i.i.d. uniform on `[lo, hi)`.
///
/// Each entry is drawn in `f64` and rounded to `T`. A draw that rounds up to
/// `hi` is redrawn, so the half-open bound holds in `T` as well.
pub fn seeded_uniform<T: Real>(
    rng: &mut RngState,
    lo: f64,
    hi: f64,
    m: usize,
    n: usize,
) -> Result<Matrix<T>> {
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(Error::Argument(format!(
            "uniform bounds must satisfy lo <= hi, got [{lo}, {hi})"
        )));
    }
    let (lo_t, hi_t) = (T::from_f64(lo), T::from_f64(hi));
    let mut data = Vec::with_capacity(m * n);
    for _ in 0..m * n {
        if lo == hi {
            data.push(lo_t);
            continue;
        }
        loop {
            let v = T::from_f64(rng.uniform(lo, hi));
            if v < hi_t || lo_t == hi_t {
                data.push(v);
                break;
            }
        }
    }
    Matrix::from_vec(m, n, data)
}
