//! Order-preserving parallel map over a bounded number of worker threads.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

/// Applies `f` to every item on up to `workers` threads and returns results
/// in input order. Once `stop` returns true for any result, no further items
/// are started; items never started come back as `None`.
pub fn map_until<T, R, F, S>(items: &[T], workers: usize, f: F, stop: S) -> Vec<Option<R>>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
    S: Fn(&R) -> bool + Sync,
{
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let halted = AtomicBool::new(false);
    let work = || loop {
        if halted.load(Ordering::SeqCst) {
            break;
        }
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= items.len() {
            break;
        }
        let result = f(i, &items[i]);
        if stop(&result) {
            halted.store(true, Ordering::SeqCst);
        }
        *slots[i].lock().expect("slot lock") = Some(result);
    };
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }
    slots.into_iter().map(|m| m.into_inner().expect("slot lock")).collect()
}

/// [`map_until`] that never stops early.
pub fn map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    map_until(items, workers, f, |_| false).into_iter().map(|r| r.expect("every item processed")).collect()
}

/// Maps fallibly, stopping at the first error.
pub fn try_map<T, R, E, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(usize, &T) -> Result<R, E> + Sync,
{
    let mut out = Vec::with_capacity(items.len());
    // Unstarted items only exist after an error, which `?` returns first.
    for r in map_until(items, workers, f, Result::is_err).into_iter().flatten() {
        out.push(r?);
    }
    Ok(out)
}
