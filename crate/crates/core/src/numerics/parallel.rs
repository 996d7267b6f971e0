//! Chunked data parallelism with schedule-independent results.
//!
//! Work is split into fixed-size chunks regardless of the worker count and partial results are
//! combined in chunk order, so outputs are bit-identical for any thread cap.

use std::sync::atomic::{AtomicUsize, Ordering};

static MAX_THREADS: AtomicUsize = AtomicUsize::new(0);

/// Caps the number of worker threads. `0` means use available parallelism.
pub fn set_max_threads(n: usize) {
    MAX_THREADS.store(n, Ordering::Relaxed);
}

pub fn max_threads() -> usize {
    match MAX_THREADS.load(Ordering::Relaxed) {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
}

/// Maps `f` over `0..len` in chunks of `chunk` indices, returning per-chunk results in order.
pub fn map_chunks<T, F>(len: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync,
{
    let chunk = chunk.max(1);
    let ranges: Vec<_> = (0..len).step_by(chunk).map(|s| s..(s + chunk).min(len)).collect();
    let workers = max_threads().min(ranges.len());
    if workers <= 1 {
        return ranges.into_iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<T>> = (0..ranges.len()).map(|_| None).collect();
    let done: Vec<Vec<(usize, T)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= ranges.len() {
                            break;
                        }
                        out.push((i, f(ranges[i].clone())));
                    }
                    out
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    for (i, v) in done.into_iter().flatten() {
        slots[i] = Some(v);
    }
    slots.into_iter().map(|v| v.expect("every chunk computed")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_range_in_order() {
        let parts = map_chunks(10, 3, |r| r.collect::<Vec<_>>());
        assert_eq!(parts.concat(), (0..10).collect::<Vec<_>>());
        assert!(map_chunks(0, 3, |r| r.len()).is_empty());
    }
}
