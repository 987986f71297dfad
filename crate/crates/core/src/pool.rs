//! Bounded worker pool with a single consumer.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

/// Runs `work` over `items` on at most `parallel` threads.
///
/// `sink` runs on the calling thread and sees each `(index, result)` in
/// completion order, so it can act as the one serialized writer.
pub fn run_bounded<T, R, W, S>(items: &[T], parallel: usize, work: W, mut sink: S)
where
    T: Sync,
    R: Send,
    W: Fn(usize, &T) -> R + Sync,
    S: FnMut(usize, R),
{
    let workers = parallel.max(1).min(items.len());
    if workers <= 1 {
        for (i, item) in items.iter().enumerate() {
            sink(i, work(i, item));
        }
        return;
    }

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, R)>();
    thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, work) = (&next, &work);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                if tx.send((i, work(i, item))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, r) in rx {
            sink(i, r);
        }
    });
}
