//! Data-parallel loop helpers.
//!
//! With the `parallel` feature these dispatch to rayon; without it they run
//! the same closures sequentially. Reductions always combine fixed-size chunk
//! partials in index order, so results are bit-identical across thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used for reductions and elementwise maps.
pub(crate) const CHUNK: usize = 2048;

/// `out[i] = f(i)` for every index.
pub(crate) fn fill<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    for_each_chunk_mut(out, CHUNK, |c, chunk| {
        let base = c * CHUNK;
        for (i, slot) in chunk.iter_mut().enumerate() {
            *slot = f(base + i);
        }
    });
}

pub(crate) fn collect<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send + Default + Clone,
    F: Fn(usize) -> T + Sync + Send,
{
    let mut out = vec![T::default(); len];
    fill(&mut out, f);
    out
}

/// Run `f(chunk_index, chunk)` over consecutive chunks of `size` elements.
pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], size: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(size)
        .enumerate()
        .for_each(|(c, chunk)| f(c, chunk));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(size)
        .enumerate()
        .for_each(|(c, chunk)| f(c, chunk));
}

fn chunk_partials<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let range = |c: usize| c * CHUNK..((c + 1) * CHUNK).min(len);
    #[cfg(feature = "parallel")]
    {
        (0..chunks).into_par_iter().map(|c| f(range(c))).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..chunks).map(|c| f(range(c))).collect()
    }
}

/// Deterministic sum of `f(i)` over `0..len`.
pub(crate) fn sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    chunk_partials(len, |r| r.map(&f).sum::<f64>())
        .into_iter()
        .sum()
}

/// `(max value, first index attaining it)` of `f(i)`.
pub(crate) fn argmax<F>(len: usize, f: F) -> (f64, usize)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    chunk_partials(len, |r| {
        let mut best = (f64::NEG_INFINITY, r.start);
        for i in r {
            let v = f(i);
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    })
    .into_iter()
    .fold((f64::NEG_INFINITY, 0), |acc, x| if x.0 > acc.0 { x } else { acc })
}

/// `(min value, first index attaining it)` of `f(i)`.
pub(crate) fn argmin<F>(len: usize, f: F) -> (f64, usize)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let (v, i) = argmax(len, |i| -f(i));
    (-v, i)
}

pub(crate) fn max<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    argmax(len, f).0
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum(a.len(), |i| a[i] * b[i])
}

/// `y += alpha * x`.
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for_each_chunk_mut(y, CHUNK, |c, chunk| {
        let base = c * CHUNK;
        for (i, yi) in chunk.iter_mut().enumerate() {
            *yi += alpha * x[base + i];
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_matches_sequential_order_independent_of_chunking() {
        let v: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let direct: f64 = v.chunks(CHUNK).map(|c| c.iter().sum::<f64>()).sum();
        assert_eq!(sum(v.len(), |i| v[i]), direct);
    }

    #[test]
    fn argmax_takes_first_on_ties() {
        let v = [1.0, 3.0, 2.0, 3.0];
        assert_eq!(argmax(v.len(), |i| v[i]), (3.0, 1));
        assert_eq!(argmin(v.len(), |i| v[i]), (1.0, 0));
    }

    #[test]
    fn fill_covers_partial_last_chunk() {
        let out: Vec<usize> = collect(CHUNK * 2 + 5, |i| i * 2);
        assert!(out.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
