use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Runs `f` over `items` on at most `workers` threads and returns the results
/// in input order. Workers share nothing but the next-index counter; results
/// go to a single collector.
pub fn pool_map<I, R, F>(items: &[I], workers: usize, f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(usize, &I) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                slots.lock().expect("collector poisoned")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("collector poisoned")
        .into_iter()
        .map(|r| r.expect("every index is visited exactly once"))
        .collect()
}
