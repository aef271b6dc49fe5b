//! Seed derivation. Every stochastic routine takes an explicit seed, and
//! compound jobs (per-day fits, per-pair divergences) derive child seeds by
//! mixing the job seed with a stable identifier, so results never depend on
//! scheduling or iteration order.

use crate::linalg::Vec2;
use chrono::{Datelike, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive a child seed from a base seed and a salt (splitmix64 finalizer).
pub fn mix_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable salt for a calendar day.
pub fn day_salt(day: NaiveDate) -> u64 {
    day.num_days_from_ce() as i64 as u64
}

/// Stable salt for a point, from the raw bit patterns of its coordinates.
pub fn point_salt(p: Vec2) -> u64 {
    mix_seed(p.x.to_bits(), p.y.to_bits().rotate_left(17))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
