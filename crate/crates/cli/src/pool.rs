//! Fixed-size worker pool for embarrassingly parallel per-input work.
//! Workers claim input indices from a shared counter, so any number of
//! threads produces the same output vector: results are stored by input
//! index and merged in input order, and the first error in input order wins
//! regardless of which worker hit it first.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::Result;

/// Apply `work` to every item on up to `jobs` threads and return the results
/// in input order. Errors are deterministic: the one with the lowest input
/// index is returned no matter how the threads interleave.
pub fn map_indexed<T, R, F>(jobs: usize, items: &[T], work: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> Result<R> + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<R>>>> =
        items.iter().map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let outcome = work(i, &items[i]);
                *slots[i].lock().expect("no worker panics while holding a slot") = Some(outcome);
            });
        }
    });

    let mut out = Vec::with_capacity(items.len());
    for slot in slots {
        match slot.into_inner().expect("workers joined") {
            Some(Ok(value)) => out.push(value),
            Some(Err(e)) => return Err(e),
            None => unreachable!("every index below items.len() is claimed exactly once"),
        }
    }
    Ok(out)
}
