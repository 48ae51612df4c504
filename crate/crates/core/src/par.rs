//! Thin dispatch layer over the data-parallel cell/face sweeps.
//!
//! With the `parallel` feature enabled (the default) the sweeps run on the
//! rayon thread pool; without it they fall back to plain sequential loops.
//! Only index-wise independent maps are parallelized, so results are
//! bit-identical between the two paths. Reductions (dot products,
//! conservation ledgers) always run sequentially in fixed cell order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fill `out[i] = f(i)` for all indices.
pub fn par_map_indexed<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, v) in out.iter_mut().enumerate() {
            *v = f(i);
        }
    }
}

/// Sequential variant, always available (used by benches and `--threads 1`).
pub fn seq_map_indexed<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64,
{
    for (i, v) in out.iter_mut().enumerate() {
        *v = f(i);
    }
}

/// Fill a slice of arbitrary values by index.
pub fn par_map_into<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, v) in out.iter_mut().enumerate() {
            *v = f(i);
        }
    }
}

/// Run `f(i)` for `i in 0..n` producing no output, in parallel when enabled.
pub fn par_for_each_index<F>(n: usize, f: F)
where
    F: Fn(usize) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().for_each(f);
    }
    #[cfg(not(feature = "parallel"))]
    {
        for i in 0..n {
            f(i);
        }
    }
}

/// Deterministic sequential sum in slice order.
pub fn det_sum(xs: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &x in xs {
        acc += x;
    }
    acc
}

/// Deterministic dot product in index order.
pub fn det_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}
