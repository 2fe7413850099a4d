//! Seeded random streams.
//!
//! Every random decision in the toolkit draws from a ChaCha stream keyed by
//! the user seed and a stream id. ChaCha is counter based, so a stream's
//! output depends only on `(seed, stream)` and never on which thread or in
//! which order other streams were consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream keyed by a textual label, e.g. `"split/books/fr"`.
pub fn labeled(seed: u64, label: &str) -> Rng {
    stream(seed, stable_hash(label))
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub fn stable_hash(s: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    s.bytes()
        .fold(OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}
