//! Seed lattice: every random draw of a sweep is keyed by `(seed, trial, stream)`.

/// Stream index reserved for data generation (grid cells use their own index).
pub const DATA_STREAM: u64 = u64::MAX;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent 64-bit seed for one cell of the lattice.
pub fn derive_seed(seed: u64, trial: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ trial) ^ stream)
}
