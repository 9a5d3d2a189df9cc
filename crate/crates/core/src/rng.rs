//! Deterministic random streams.
//!
//! Every stochastic component receives its own [`SimRng`] seeded from a `u64`,
//! so runs are reproducible from a single master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used by simulators and samplers.
pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Mix a master seed and a stream label into an independent child seed.
pub fn derive_seed(master: u64, label: u64) -> u64 {
    // splitmix64 finaliser over the combined input
    let mut z = master ^ label.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed derived from a textual label, for named pipeline stages.
pub fn derive_named_seed(master: u64, label: &str) -> u64 {
    // FNV-1a keeps the label hash stable across platforms and releases.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    derive_seed(master, h)
}
