//! Deterministic seed derivation.
//!
//! Every module draws randomness from its own ChaCha8 stream, seeded through
//! [`derive_seed`]. The derivation is `splitmix64(master ^ fnv1a(role) ^
//! (index * GOLDEN))`, so one master seed reproduces an entire experiment
//! while distinct roles and indices get decorrelated streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// FNV-1a hash of the role tag.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// splitmix64 finalizer; decorrelates nearby inputs.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a module seed from the master seed, a role tag, and an index.
pub fn derive_seed(master: u64, role: &str, index: u64) -> u64 {
    splitmix64(master ^ fnv1a(role.as_bytes()) ^ index.wrapping_mul(GOLDEN))
}

/// The crate-standard RNG for a derived seed.
pub fn rng_for(master: u64, role: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, role, index))
}
