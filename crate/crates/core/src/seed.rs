//! Seed derivation.
//!
//! Every random stream in the crate is derived from one top-level seed by
//! mixing in a component name and an index. The mixing is a fixed FNV-1a hash
//! of the name followed by SplitMix64 finalisation, so derived seeds are stable
//! across platforms and compiler versions. A partial rerun (say, only trial 57
//! of a search) therefore sees exactly the randomness it saw the first time.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed for `component` number `index` under `base`.
pub fn derive(base: u64, component: &str, index: u64) -> u64 {
    let h = mix64(base ^ fnv1a(component.as_bytes()));
    mix64(h ^ mix64(index))
}

/// Convenience: a generator seeded from [`derive`].
pub fn rng(base: u64, component: &str, index: u64) -> Rng {
    Rng::seed_from_u64(derive(base, component, index))
}
