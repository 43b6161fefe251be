//! Deterministic derivation of per-task seeds from a master seed.

/// Mixes a master seed with two task coordinates (for example the horizon
/// and a replication index) into an independent-looking 64-bit seed.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    let mut h = mix(master ^ 0x243f_6a88_85a3_08d3);
    h = mix(h ^ a);
    mix(h ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
