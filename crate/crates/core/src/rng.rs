//! Counter-based random substreams.
//!
//! Every random quantity in a run is drawn from a stream addressed by
//! `(seed, domain, index, batch)`. Streams never overlap, so results do not
//! depend on the order in which variables, replicates or folds are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct domains never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Split = 1,
    TowerResample = 2,
    HrtResample = 3,
    OracleResample = 4,
    CrossFitFolds = 5,
    CrossFitResample = 6,
    SigmaResample = 7,
    CvFolds = 8,
    Predictors = 9,
    Noise = 10,
    NonnullSet = 11,
    Replicate = 12,
    Diagnostics = 13,
    Instance = 14,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed, e.g. one per Monte Carlo replicate.
pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    mix64(mix64(seed ^ mix64(domain as u64)) ^ index)
}

/// Independent stream for `(seed, domain, index, batch)`.
///
/// `index` is typically a variable and `batch` a resample number; both are
/// packed into the ChaCha stream id so that each batch can be generated
/// without touching any other.
pub fn substream(seed: u64, domain: Domain, index: u64, batch: u64) -> ChaCha8Rng {
    let key = derive_seed(seed, domain, index >> 32);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(((index & 0xffff_ffff) << 32) | (batch & 0xffff_ffff));
    rng
}

/// Single stream for a domain, for one-off draws like splits.
pub fn stream(seed: u64, domain: Domain) -> ChaCha8Rng {
    substream(seed, domain, 0, 0)
}
