//! Deterministic block-seeded random streams.
//!
//! Monte Carlo work is cut into fixed-size blocks. Block `b` always draws from
//! ChaCha stream `b` of the generator seeded with the master seed, so results
//! depend only on `(seed, n)` and never on how many threads ran the blocks.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Trials per block.
pub const BLOCK_LEN: usize = 4096;

pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Mixes a purpose tag into a master seed so that independent consumers of
/// the same seed (channel draws, noise draws, symbol draws) never share streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn block_ranges(n: usize) -> impl IndexedParallelIterator<Item = (u64, Range<usize>)> {
    let blocks = n.div_ceil(BLOCK_LEN);
    (0..blocks)
        .into_par_iter()
        .map(move |b| (b as u64, b * BLOCK_LEN..((b + 1) * BLOCK_LEN).min(n)))
}

/// Runs `f` once per block and returns the per-block results in block order.
///
/// `workers` pins the thread count; `None` uses the global rayon pool.
pub fn map_blocks<R, F>(n: usize, seed: u64, workers: Option<usize>, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(&mut ChaCha8Rng, Range<usize>) -> R + Sync + Send,
{
    let run = || {
        block_ranges(n)
            .map(|(b, range)| f(&mut block_rng(seed, b), range))
            .collect::<Vec<_>>()
    };
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .expect("thread pool")
            .install(run),
        None => run(),
    }
}
