// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seed splitting.
//!
//! Every random quantity in an experiment is drawn from a ChaCha8 stream whose
//! seed is derived from the master seed and a path of integer labels, e.g.
//! `derive(master, &[DATA, label("s1-sync-3"), replica])`. Derivation is a
//! chain of SplitMix64 finalizers, so sibling paths give unrelated streams and
//! any single replica can be regenerated without running the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random number generator used for all simulated data.
pub type SimRng = ChaCha8Rng;

/// Path label for ARL calibration intervals.
pub const CALIBRATION: u64 = 0xCA11;
/// Path label for scenario observation matrices.
pub const DATA: u64 = 0xDA7A;
/// Path label for one-shot false-alarm runs.
pub const FALSE_ALARM: u64 = 0xFA15;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and a label path.
pub fn derive(parent: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix64(parent.wrapping_add(GOLDEN_GAMMA)), |acc, &p| {
            mix64(acc.wrapping_add(GOLDEN_GAMMA) ^ mix64(p.wrapping_add(GOLDEN_GAMMA)))
        })
}

/// Stable 64-bit label for a name (FNV-1a).
pub fn label(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Builds the simulation RNG for a derived seed.
pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
