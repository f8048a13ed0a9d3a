//! Deterministic parallel accumulation.
//!
//! Work is split into fixed chunks, each chunk produces a partial result, and
//! partials are merged in chunk order — output is bitwise independent of the
//! thread schedule.

use rayon::prelude::*;

/// Number of fixed chunks used for deterministic reductions.
pub const CHUNKS: usize = 64;

/// Map `0..n` in fixed chunks, merging partial accumulators in chunk order.
pub fn accumulate<T, A: Send>(
    n: usize,
    make: impl Fn() -> A + Sync,
    fill: impl Fn(std::ops::Range<usize>, &mut A) + Sync,
    merge: impl Fn(&mut T, A),
    mut total: T,
) -> T {
    if n == 0 {
        return total;
    }
    let chunk = n.div_ceil(CHUNKS.min(n));
    let ranges: Vec<std::ops::Range<usize>> = (0..n)
        .step_by(chunk)
        .map(|s| s..(s + chunk).min(n))
        .collect();
    let partials: Vec<A> = ranges
        .into_par_iter()
        .map(|r| {
            let mut acc = make();
            fill(r, &mut acc);
            acc
        })
        .collect();
    for p in partials {
        merge(&mut total, p);
    }
    total
}

/// Deterministic parallel sum of vectors of `len` floats.
pub fn sum_vectors(
    n: usize,
    len: usize,
    fill: impl Fn(std::ops::Range<usize>, &mut [f64]) + Sync,
) -> Vec<f64> {
    accumulate(
        n,
        || vec![0.0f64; len],
        |r, acc| fill(r, acc),
        |tot: &mut Vec<f64>, part| {
            for (t, p) in tot.iter_mut().zip(part) {
                *t += p;
            }
        },
        vec![0.0f64; len],
    )
}
