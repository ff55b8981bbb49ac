//! Deterministic data-parallel primitives.
//!
//! All reductions are evaluated over fixed-size chunks whose partial sums are
//! combined in chunk order, so the rayon path and the sequential fallback
//! produce bit-identical floating point results. Runs are therefore
//! reproducible regardless of thread count or feature selection.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for ordered reductions.
pub const CHUNK: usize = 4096;

/// Size below which the parallel path is not worth spawning. Bandwidth-bound
/// kernels (sums, axpy) only pay off on very large vectors; compute-dense
/// per-element work (sparse rows, stencil applications) pays off much
/// earlier.
#[cfg(feature = "parallel")]
const PAR_MIN: usize = 1 << 18;
#[cfg(feature = "parallel")]
const PAR_MIN_COMPUTE: usize = 1 << 15;

fn chunk_sum<F: Fn(usize) -> f64>(lo: usize, hi: usize, term: &F) -> f64 {
    let mut acc = 0.0;
    for k in lo..hi {
        acc += term(k);
    }
    acc
}

/// Ordered chunked reduction, sequential path.
pub fn sum_indexed_seq<F: Fn(usize) -> f64>(n: usize, term: F) -> f64 {
    let mut total = 0.0;
    let mut lo = 0;
    while lo < n {
        let hi = (lo + CHUNK).min(n);
        total += chunk_sum(lo, hi, &term);
        lo = hi;
    }
    total
}

/// Ordered chunked reduction, parallel path. Chunk partials are collected and
/// added in chunk order, matching [`sum_indexed_seq`] bit for bit.
#[cfg(feature = "parallel")]
pub fn sum_indexed_par<F: Fn(usize) -> f64 + Sync>(n: usize, term: F) -> f64 {
    let chunks = n.div_ceil(CHUNK);
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            chunk_sum(lo, hi, &term)
        })
        .collect();
    partials.iter().sum()
}

/// Ordered chunked reduction over `0..n`.
pub fn sum_indexed<F: Fn(usize) -> f64 + Sync>(n: usize, term: F) -> f64 {
    #[cfg(feature = "parallel")]
    if n >= PAR_MIN {
        return sum_indexed_par(n, term);
    }
    sum_indexed_seq(n, term)
}

/// Fill `out[k] = f(k)`, sequential path.
pub fn fill_indexed_seq<F: Fn(usize) -> f64>(out: &mut [f64], f: F) {
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = f(k);
    }
}

/// Fill `out[k] = f(k)` in parallel. Elements are independent, so the result
/// matches the sequential path exactly.
#[cfg(feature = "parallel")]
pub fn fill_indexed_par<F: Fn(usize) -> f64 + Sync>(out: &mut [f64], f: F) {
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let base = c * CHUNK;
        for (k, slot) in chunk.iter_mut().enumerate() {
            *slot = f(base + k);
        }
    });
}

/// Fill `out[k] = f(k)` (light per-element work).
pub fn fill_indexed<F: Fn(usize) -> f64 + Sync>(out: &mut [f64], f: F) {
    #[cfg(feature = "parallel")]
    if out.len() >= PAR_MIN {
        fill_indexed_par(out, f);
        return;
    }
    fill_indexed_seq(out, f);
}

/// Fill `out[k] = f(k)` where each element does nontrivial work (sparse-row
/// products, stencil applications); parallelizes at moderate sizes.
pub fn fill_indexed_compute<F: Fn(usize) -> f64 + Sync>(out: &mut [f64], f: F) {
    #[cfg(feature = "parallel")]
    if out.len() >= PAR_MIN_COMPUTE {
        fill_indexed_par(out, f);
        return;
    }
    fill_indexed_seq(out, f);
}

/// Euclidean dot product with ordered chunked accumulation.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_indexed(a.len(), |k| a[k] * b[k])
}

/// Sequential dot product (bench baseline).
pub fn dot_seq(a: &[f64], b: &[f64]) -> f64 {
    sum_indexed_seq(a.len(), |k| a[k] * b[k])
}

/// Parallel dot product (bench counterpart of [`dot_seq`]).
#[cfg(feature = "parallel")]
pub fn dot_par(a: &[f64], b: &[f64]) -> f64 {
    sum_indexed_par(a.len(), |k| a[k] * b[k])
}

/// Squared Euclidean norm.
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `y ← y + c·x`.
pub fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    #[cfg(feature = "parallel")]
    if y.len() >= PAR_MIN {
        y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += c * xi);
        return;
    }
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

/// `p ← z + b·p`.
pub fn xpby(p: &mut [f64], b: f64, z: &[f64]) {
    debug_assert_eq!(p.len(), z.len());
    #[cfg(feature = "parallel")]
    if p.len() >= PAR_MIN {
        p.par_iter_mut().zip(z.par_iter()).for_each(|(pi, zi)| *pi = zi + b * *pi);
        return;
    }
    for (pi, zi) in p.iter_mut().zip(z) {
        *pi = zi + b * *pi;
    }
}

/// `x ← c·x`.
pub fn scale(x: &mut [f64], c: f64) {
    #[cfg(feature = "parallel")]
    if x.len() >= PAR_MIN {
        x.par_iter_mut().for_each(|xi| *xi *= c);
        return;
    }
    for xi in x.iter_mut() {
        *xi *= c;
    }
}
