use std::sync::Mutex;

/// Maps `f` over `jobs` on up to `workers` scoped threads. Results come back
/// in job order regardless of completion order.
pub(crate) fn par_map<T, R, F>(jobs: Vec<T>, workers: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let n = jobs.len();
    if workers <= 1 || n <= 1 {
        return jobs.into_iter().map(f).collect();
    }
    let queue = Mutex::new(jobs.into_iter().enumerate());
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.min(n) {
            s.spawn(|| loop {
                let next = queue.lock().expect("job queue poisoned").next();
                let Some((i, job)) = next else { break };
                let out = f(job);
                slots.lock().expect("result slots poisoned")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|r| r.expect("every job produces a result"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let jobs: Vec<u64> = (0..50).collect();
        let out = par_map(jobs.clone(), 4, |x| {
            std::thread::sleep(std::time::Duration::from_micros((50 - x) * 10));
            x * 2
        });
        assert_eq!(out, jobs.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert_eq!(par_map(Vec::<u8>::new(), 4, |x| x), Vec::<u8>::new());
    }
}
