//! Deterministic derivation of per-cell seeds from a master seed.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the cell identified by `path` under `master`. Pure: the same
/// inputs give the same seed regardless of evaluation order.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

/// Stable integer tag for a load value, so `0.7` and `0.70000001` differ.
pub fn load_tag(load: f64) -> u64 {
    load.to_bits()
}
