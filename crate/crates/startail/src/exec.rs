//! Chunked execution with a fixed reduction order.
//!
//! Work is split into fixed-size chunks independent of the worker count, and
//! partial results are reduced pairwise in chunk order. Together with the
//! counter-based RNG keys this makes every result bit-identical whether the
//! chunks run on one thread or many.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use std::ops::Range;

/// Draws per chunk for Monte Carlo loops. Fixed so chunk boundaries (and
/// therefore RNG keys) never depend on the machine.
pub const CHUNK: usize = 4096;

/// How to drive the chunk loop. `Parallel` requires the `parallel` feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Mode {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        Mode::Parallel
    }
    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        Mode::Sequential
    }
}

fn chunk_ranges(n: usize, chunk: usize) -> Vec<(usize, Range<usize>)> {
    let chunk = chunk.max(1);
    (0..n.div_ceil(chunk))
        .map(|c| (c, c * chunk..((c + 1) * chunk).min(n)))
        .collect()
}

/// Map chunks sequentially; results in chunk order.
pub fn map_chunks_seq<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Range<usize>) -> T + Sync,
{
    chunk_ranges(n, chunk)
        .into_iter()
        .map(|(c, r)| f(c, r))
        .collect()
}

/// Map chunks on the rayon pool; results still in chunk order.
#[cfg(feature = "parallel")]
pub fn map_chunks_par<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Range<usize>) -> T + Sync,
{
    chunk_ranges(n, chunk)
        .into_par_iter()
        .map(|(c, r)| f(c, r))
        .collect()
}

/// Map chunks in the given mode.
pub fn map_chunks_in<T, F>(mode: Mode, n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Range<usize>) -> T + Sync,
{
    match mode {
        Mode::Sequential => map_chunks_seq(n, chunk, f),
        #[cfg(feature = "parallel")]
        Mode::Parallel => map_chunks_par(n, chunk, f),
    }
}

/// Map chunks in the default mode for this build.
pub fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Range<usize>) -> T + Sync,
{
    map_chunks_in(Mode::default(), n, chunk, f)
}

/// Pairwise summation in slice order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}
