//! Seeded random streams.
//!
//! Every random draw in the workspace comes from a [`ChaCha8Rng`] keyed by a
//! single 64-bit seed. Independent consumers get independent ChaCha streams:
//! the stream id is a 64-bit FNV-1a hash of a textual tag followed by the
//! little-endian bytes of any integer coordinates (trial index, `p`, ...).
//! Results therefore depend only on `(seed, tag, coordinates)`, never on the
//! order in which work is scheduled.
//!
//! Generator: `rand_chacha` 0.9 `ChaCha8Rng`, seeded with
//! `seed_from_u64(seed)` and `set_stream(stream_id)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Stream id for a tag and integer coordinates.
pub fn stream_id(tag: &str, coords: &[u64]) -> u64 {
    let mut h = FNV_OFFSET;
    let mut eat = |b: u8| {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    };
    for b in tag.bytes() {
        eat(b);
    }
    // separator so ("ab", []) and ("a", [..]) never collide on the tag bytes
    eat(0xff);
    for c in coords {
        for b in c.to_le_bytes() {
            eat(b);
        }
    }
    h
}

/// Deterministic generator for `(seed, tag, coords)`.
pub fn stream(seed: u64, tag: &str, coords: &[u64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(tag, coords));
    rng
}

/// Derives a child seed, e.g. the instance seed of a sweep trial.
pub fn derive_seed(seed: u64, tag: &str, coords: &[u64]) -> u64 {
    use rand::RngCore;
    stream(seed, tag, coords).next_u64()
}
