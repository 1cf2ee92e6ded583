//! Deterministic seeding. Every random object in an instance draws from its own
//! ChaCha stream whose seed is derived from `(base seed, stream tag, index)`, so a
//! single snapshot matrix can be regenerated without replaying the others.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub(crate) const STREAM_SIGNAL: u64 = 1;
pub(crate) const STREAM_GAIN: u64 = 2;
pub(crate) const STREAM_SENSING: u64 = 3;
pub(crate) const STREAM_NOISE: u64 = 4;
pub(crate) const STREAM_SIGNAL_BASIS: u64 = 5;
pub(crate) const STREAM_GAIN_BASIS: u64 = 6;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream tag and an index into a fresh 64-bit seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ stream.rotate_left(17)) ^ index.rotate_left(41))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entry distribution of the sensing vectors: centred, unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    #[default]
    Gaussian,
    Rademacher,
}

impl Distribution {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Distribution::Gaussian => rng.sample(StandardNormal),
            Distribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// Fourth moment of a single entry; equal to 1 only for Rademacher.
    pub fn fourth_moment(self) -> f64 {
        match self {
            Distribution::Gaussian => 3.0,
            Distribution::Rademacher => 1.0,
        }
    }
}

pub(crate) fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
