//! Data-parallel kernels with a sequential fallback.
//!
//! All reductions are computed per fixed-size block and the block partials are
//! folded in block order, so results are bit-identical whether the `parallel`
//! feature is enabled or not, and independent of the rayon schedule.

/// Block length for deterministic reductions.
pub const BLOCK: usize = 8192;

/// Pin the worker thread count (0 keeps the library default). Results do not
/// depend on the count; only wall time does.
pub fn set_threads(n: usize) {
    #[cfg(feature = "parallel")]
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

/// Sum of `f(i)` for `i in 0..n`, reduced blockwise in a fixed order.
pub fn indexed_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let partials = block_partials(n, &f);
    partials.into_iter().fold(0.0, |acc, p| acc + p)
}

fn block_partials<F>(n: usize, f: &F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let nblocks = n.div_ceil(BLOCK);
    let block_sum = |b: usize| -> f64 {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(n);
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    };
    seq_or_par_map(nblocks, block_sum)
}

/// Map `g` over `0..n` collecting into a Vec (order preserved).
pub fn indexed_map<G>(n: usize, g: G) -> Vec<f64>
where
    G: Fn(usize) -> f64 + Sync + Send,
{
    seq_or_par_map(n, g)
}

#[cfg(feature = "parallel")]
fn seq_or_par_map<T, G>(n: usize, g: G) -> Vec<T>
where
    T: Send,
    G: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(g).collect()
}

#[cfg(not(feature = "parallel"))]
fn seq_or_par_map<T, G>(n: usize, g: G) -> Vec<T>
where
    G: Fn(usize) -> T,
{
    (0..n).map(g).collect()
}

/// Apply `f` to each chunk of `data` of length `chunk` (last may be shorter).
/// Chunks are disjoint so this parallelizes without ordering concerns.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(b, c)| f(b, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().for_each(|(b, c)| f(b, c));
    }
}

/// Sequential reference implementations used by the benchmark suite to
/// compare against the (possibly parallel) public kernels.
pub mod reference {
    use super::BLOCK;

    pub fn indexed_sum_seq<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
        let nblocks = n.div_ceil(BLOCK);
        let mut total = 0.0;
        for b in 0..nblocks {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(n);
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            total += acc;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blockwise_sum_matches_sequential_reference_bitwise() {
        let f = |i: usize| ((i as f64) * 0.1).sin() / (1.0 + i as f64);
        for n in [0usize, 1, 7, BLOCK - 1, BLOCK, BLOCK + 1, 3 * BLOCK + 17] {
            let a = indexed_sum(n, f);
            let b = reference::indexed_sum_seq(n, f);
            assert_eq!(a.to_bits(), b.to_bits(), "n={n}");
        }
    }

    #[test]
    fn indexed_map_preserves_order() {
        let v = indexed_map(1000, |i| i as f64);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[999], 999.0);
    }
}
