//! Counter-based randomness.
//!
//! Every random quantity in the laboratory is a pure function of a 64-bit
//! seed and an integer address (a lattice site, a walker index, a replica
//! index). Windows can therefore grow, and work can be split across threads,
//! without changing any drawn value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream tags keep the draws for different site attributes independent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Atom = 1,
    Obstacle = 2,
    Walker = 3,
    Environment = 4,
    Bootstrap = 5,
    Resample = 6,
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn to_unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in [0, 1) addressed by (seed, stream, site).
#[inline]
pub fn site_uniform(seed: u64, stream: Stream, site: &[i64]) -> f64 {
    let mut h = mix64(seed ^ (stream as u64).wrapping_mul(GOLDEN));
    for &c in site {
        h = mix64(h ^ (c as u64).wrapping_add(GOLDEN));
    }
    to_unit(h)
}

/// Uniform draw for a one-dimensional site; agrees with `site_uniform(seed, stream, &[x])`.
#[inline]
pub fn site_uniform_1d(seed: u64, stream: Stream, x: i64) -> f64 {
    let h = mix64(seed ^ (stream as u64).wrapping_mul(GOLDEN));
    to_unit(mix64(h ^ (x as u64).wrapping_add(GOLDEN)))
}

/// Child seed for replicate `index` of a given kind.
#[inline]
pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    mix64(mix64(master ^ (stream as u64).wrapping_mul(GOLDEN)) ^ index.wrapping_mul(GOLDEN))
}

/// Sequential generator for replicate `index` (walkers, bootstrap replicas).
pub fn stream_rng(master: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}
