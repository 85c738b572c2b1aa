//! Deterministic fan-out over items: results come back in input order no
//! matter how work interleaves, so outputs are identical at any thread
//! count. Used for annotation, corpus encoding, and diagnostics; the
//! training step itself stays single-threaded.

pub fn parallel_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let threads = threads.min(items.len());
    let chunk = items.len().div_ceil(threads);
    let mut slots: Vec<Option<R>> = Vec::with_capacity(items.len());
    slots.resize_with(items.len(), || None);
    std::thread::scope(|scope| {
        for (input, output) in items.chunks(chunk).zip(slots.chunks_mut(chunk)) {
            scope.spawn(|| {
                for (item, slot) in input.iter().zip(output.iter_mut()) {
                    *slot = Some(f(item));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("slot filled")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_at_any_thread_count() {
        let items: Vec<u64> = (0..103).collect();
        let square = |x: &u64| x * x;
        let sequential = parallel_map(&items, 1, square);
        for threads in [2, 3, 8, 200] {
            assert_eq!(parallel_map(&items, threads, square), sequential);
        }
    }

    #[test]
    fn empty_and_singleton_inputs() {
        let empty: Vec<u32> = vec![];
        assert!(parallel_map(&empty, 4, |x| *x).is_empty());
        assert_eq!(parallel_map(&[7u32], 4, |x| *x + 1), vec![8]);
    }
}
