//! Seed-derived random substreams.
//!
//! Every random draw in a simulation comes from a ChaCha stream whose seed is
//! a hash of the run seed and a key path such as `(browse, policy, round,
//! user)`. Two draws with different key paths never share a stream, so the
//! order in which users or policies are processed (serial or parallel) does
//! not change any result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream type used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Domain tags separating the top-level stream families of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    UserSample = 1,
    Recommend = 2,
    Browse = 3,
    Segment = 4,
    Synthetic = 5,
    KMeans = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a run seed and a key path into a 64-bit stream seed.
pub fn derive_seed(seed: u64, tag: StreamTag, keys: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ splitmix64(tag as u64));
    for &k in keys {
        h = splitmix64(h ^ splitmix64(k.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

/// Opens the substream for `(seed, tag, keys...)`.
pub fn substream(seed: u64, tag: StreamTag, keys: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, tag, keys))
}

/// Stable 64-bit FNV-1a hash, used to key streams by policy name.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}
