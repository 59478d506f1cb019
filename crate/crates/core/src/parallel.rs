//! Order-preserving fan-out over scoped threads.

use crate::error::Result;

/// Applies `f` to every item on up to `workers` threads and returns the
/// results in input order. Results are identical for any worker count.
pub fn map<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let per = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(per)
            .map(|chunk| s.spawn(|| chunk.iter().map(&f).collect::<Result<Vec<R>>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().expect("worker panicked")?);
        }
        Ok(out)
    })
}

#[cfg(test)]
mod tests {
    #[test]
    fn order_is_kept_for_any_worker_count() {
        let items: Vec<u64> = (0..37).collect();
        let one = super::map(&items, 1, |v| Ok(v * v)).unwrap();
        for w in [2, 3, 8, 100] {
            assert_eq!(super::map(&items, w, |v| Ok(v * v)).unwrap(), one);
        }
    }
}
