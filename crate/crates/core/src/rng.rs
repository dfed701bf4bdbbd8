//! Seeded random streams. Every source of randomness in a run is derived
//! from the run seed and a fixed stream label, so runs are reproducible and
//! streams stay independent of each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Labels for the independent streams of one run.
pub mod label {
    pub const ENVIRONMENT: u64 = 0x656e_7669;
    pub const ALGORITHM: u64 = 0x616c_676f;
    pub const BUCKET: u64 = 0x6275_636b;
    pub const ORACLE: u64 = 0x6f72_636c;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, label: u64) -> Stream {
    Stream::seed_from_u64(splitmix64(seed ^ splitmix64(label)))
}
