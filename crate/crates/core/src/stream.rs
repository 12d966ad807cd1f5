//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a ChaCha generator whose key is
//! derived from a master seed and a path of indices, e.g.
//! `(master, replicate, PERMUTATIONS, permutation, attempt)`. Two different
//! paths give statistically independent streams, and the stream for a given
//! path is the same regardless of which thread asks for it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Path tags that separate the uses of one replicate's seed.
pub const TAG_DATA: u64 = 0x6461_7461;
pub const TAG_PERMUTATIONS: u64 = 0x7065_726d;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and an index path.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(seed);
    for (depth, &p) in path.iter().enumerate() {
        state = splitmix64(state ^ splitmix64(p.wrapping_add((depth as u64 + 1).wrapping_mul(GOLDEN))));
    }
    state
}

/// Generator for the stream addressed by `(seed, path...)`.
pub fn stream_rng(seed: u64, path: &[u64]) -> StreamRng {
    let mut state = derive_seed(seed, path);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    StreamRng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_path_same_stream() {
        let mut a = stream_rng(7, &[1, 2]);
        let mut b = stream_rng(7, &[1, 2]);
        for _ in 0..8 {
            assert_eq!(a.gen::<u64>(), b.gen::<u64>());
        }
    }

    #[test]
    fn distinct_paths_differ() {
        let first = |seed, path: &[u64]| -> u64 { stream_rng(seed, path).gen() };
        assert_ne!(first(7, &[1, 2]), first(7, &[2, 1]));
        assert_ne!(first(7, &[1]), first(7, &[1, 0]));
        assert_ne!(first(7, &[1]), first(8, &[1]));
    }

    #[test]
    fn known_first_draw_is_stable() {
        // Guards the determinism contract: changing key derivation changes every output file.
        let x: u64 = stream_rng(0, &[]).gen();
        assert_eq!(x, stream_rng(0, &[]).gen::<u64>());
        assert_eq!(derive_seed(0, &[]), splitmix64(0));
    }
}
