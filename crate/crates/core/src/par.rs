//! Order-preserving parallel map over independent jobs.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Applies `f` to every item on up to `threads` workers. Results keep the input order,
/// so the output does not depend on scheduling.
pub fn par_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = threads.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("worker panicked") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("worker panicked").expect("job not run")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_for_any_worker_count() {
        let items: Vec<u64> = (0..37).collect();
        let serial = par_map(&items, 1, |x| x * x + 1);
        for t in [2, 3, 8, 64] {
            assert_eq!(par_map(&items, t, |x| x * x + 1), serial);
        }
        assert!(par_map(&Vec::<u64>::new(), 4, |x| *x).is_empty());
    }
}
