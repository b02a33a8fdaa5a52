//! Seed derivation and counter-based instruction streams.
//!
//! Every random quantity in the simulator is a pure function of a 64-bit
//! master seed and a small tuple of integer coordinates. The convention is
//! stable across versions:
//!
//! * `derive_seed(parent, index)` produces a child seed. Ensembles use
//!   `cell = derive_seed(master, cell_index)` and
//!   `trial = derive_seed(cell, trial_index)`.
//! * the stack of site `x` on lane `l` is keyed by
//!   `derive_seed(derive_seed(seed, x as u64), l.tag())`, and its `k`-th
//!   instruction word is `mix64(key + k * GOLDEN_GAMMA)` (a SplitMix64
//!   stream positioned at counter `k`).
//!
//! Because any word can be computed directly from its coordinates, two runs
//! that share a seed see identical stacks regardless of the order in which
//! sites are toppled.

use rand_core::{impls, RngCore};

/// Weyl increment of SplitMix64.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function (Stafford variant 13).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `index` under `parent`.
#[inline]
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    mix64(parent ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Key of the instruction stack at `(site, lane_tag)`.
#[inline]
pub fn stack_key(seed: u64, site: i64, lane_tag: u64) -> u64 {
    derive_seed(derive_seed(seed, site as u64), lane_tag)
}

/// The `index`-th raw word of the stream keyed by `key`.
#[inline]
pub fn stream_word(key: u64, index: u64) -> u64 {
    mix64(key.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Uniform double in `[0, 1)` from the top 53 bits of a word.
#[inline]
pub fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sequential SplitMix64 generator.
///
/// Used where the core needs its own randomness (random toppling orders).
/// Callers that want a cryptographic-quality stream pass any other
/// [`RngCore`] to the samplers.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }
}

impl RngCore for SplitMix64 {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        impls::fill_bytes_via_next(self, dest)
    }
}

/// Uniform double in `[0, 1)` drawn from `rng`.
#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    unit_f64(rng.next_u64())
}

/// Uniform integer in `0..n` (Lemire's nearly-divisionless method).
pub fn below<R: RngCore + ?Sized>(rng: &mut R, n: u64) -> u64 {
    assert!(n > 0);
    let mut m = (rng.next_u64() as u128) * (n as u128);
    if (m as u64) < n {
        let threshold = n.wrapping_neg() % n;
        while (m as u64) < threshold {
            m = (rng.next_u64() as u128) * (n as u128);
        }
    }
    (m >> 64) as u64
}
