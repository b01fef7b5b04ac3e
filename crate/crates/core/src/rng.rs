//! Keyed random streams. Each stream is a ChaCha generator seeded from a
//! stable hash of the run seed and a key path, so draws never depend on the
//! order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit key for `(seed, parts...)`.
pub fn stream_key(seed: u64, parts: &[&str]) -> u64 {
    parts.iter().fold(splitmix(seed), |acc, p| {
        // length prefix keeps ("ab","c") and ("a","bc") apart
        splitmix(acc ^ fnv1a(p.as_bytes()) ^ (p.len() as u64).rotate_left(32))
    })
}

pub fn keyed_rng(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_key(seed, parts))
}
