//! Deterministic parallel execution.
//!
//! All data-parallel loops in this crate go through the helpers here so that
//! results are bit-identical no matter how many worker threads run them.
//! Reductions split the input into fixed-size chunks, reduce each chunk
//! sequentially, and fold the per-chunk partials in index order; only the
//! chunk-level work is distributed across threads.
//!
//! The pool size is taken from the `ROLLFIT_THREADS` environment variable the
//! first time any helper runs (unset or unparsable means "one thread per
//! core"). It is read once per process.

use std::sync::OnceLock;

use rayon::prelude::*;

/// Fixed reduction granularity. Changing this changes float summation order,
/// so it is a constant rather than a tunable.
const CHUNK: usize = 4096;

/// Shared worker pool, sized by `ROLLFIT_THREADS` on first use.
pub fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = configured_threads() {
            builder = builder.num_threads(n);
        }
        builder.build().expect("failed to build worker pool")
    })
}

fn configured_threads() -> Option<usize> {
    let raw = std::env::var("ROLLFIT_THREADS").ok()?;
    raw.trim().parse::<usize>().ok().filter(|&n| n > 0)
}

/// Sums `K` accumulators over `items`. `per_item` adds one item's
/// contribution into the accumulator array. The summation order is fixed:
/// sequential within each 4096-item chunk, then chunk partials added in
/// chunk order.
pub fn accumulate<T, F, const K: usize>(items: &[T], per_item: F) -> [f64; K]
where
    T: Sync,
    F: Fn(&T, &mut [f64; K]) + Sync,
{
    let partials: Vec<[f64; K]> = thread_pool().install(|| {
        items
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = [0.0_f64; K];
                for item in chunk {
                    per_item(item, &mut acc);
                }
                acc
            })
            .collect()
    });
    let mut total = [0.0_f64; K];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part.iter()) {
            *t += p;
        }
    }
    total
}

/// Computes one output row per index in `0..rows`, in parallel, returning
/// them in row order.
pub fn map_rows<R, F>(rows: usize, per_row: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    thread_pool().install(|| (0..rows).into_par_iter().map(per_row).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulate_matches_sequential_sum() {
        let items: Vec<f64> = (0..20_000).map(|i| (i as f64).sin()).collect();
        let [par_sum] = accumulate(&items, |x, acc: &mut [f64; 1]| acc[0] += x);
        // Reproduce the exact chunked order sequentially.
        let mut seq_sum = 0.0;
        for chunk in items.chunks(CHUNK) {
            let mut acc = 0.0;
            for x in chunk {
                acc += x;
            }
            seq_sum += acc;
        }
        assert_eq!(par_sum.to_bits(), seq_sum.to_bits());
    }

    #[test]
    fn accumulate_handles_empty_and_multiple_slots() {
        let empty: [f64; 0] = [];
        let [a, b] = accumulate(&empty, |_, _acc: &mut [f64; 2]| unreachable!());
        assert_eq!(a, 0.0);
        assert_eq!(b, 0.0);

        let items = [1.0, 2.0, 3.0];
        let [sum, sum_sq] = accumulate(&items, |x, acc: &mut [f64; 2]| {
            acc[0] += x;
            acc[1] += x * x;
        });
        assert_eq!(sum, 6.0);
        assert_eq!(sum_sq, 14.0);
    }

    #[test]
    fn map_rows_preserves_order() {
        let rows = map_rows(100, |v| v * 2);
        assert_eq!(rows.len(), 100);
        assert!(rows.iter().enumerate().all(|(i, &r)| r == i * 2));
    }
}
