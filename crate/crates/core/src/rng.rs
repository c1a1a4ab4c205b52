//! The pinned pseudo-random generator behind every seeded operation.
//!
//! Algorithm: xoshiro256++ whose 256-bit state is filled from the `u64` seed by SplitMix64
//! (increment `0x9E3779B97F4A7C15`, mixing multipliers `0xBF58476D1CE4E5B9` and
//! `0x94D049BB133111EB`). Uniform doubles take the top 53 bits of each output,
//! `(x >> 11) * 2^-53`. Normal deviates use the Box-Muller transform on two consecutive
//! uniforms `u1, u2` as `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`, with the matching `sin` value
//! handed out by the next call.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Debug, Clone)]
pub struct Rng {
    inner: Xoshiro256PlusPlus,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { inner: Xoshiro256PlusPlus::seed_from_u64(seed), spare_normal: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal deviate.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }
}
