//! Scoped-thread helpers. Results always come back in input order, so
//! outputs do not depend on the thread count.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use mmlmix_core::search::{CandidateRunner, Perturbation, PerturbationSpec};

pub fn available_threads() -> usize {
    std::thread::available_parallelism().map_or(1, NonZeroUsize::get)
}

/// Maps `f` over `0..n` on up to `threads` workers.
pub fn parallel_map<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                slots.lock().expect("worker panicked")[i] = Some(out);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|v| v.expect("every index is filled")).collect()
}

/// Evaluates search candidates on a fixed number of threads.
#[derive(Debug, Clone, Copy)]
pub struct Threaded {
    pub threads: usize,
}

impl CandidateRunner for Threaded {
    fn run(
        &self,
        jobs: &[PerturbationSpec],
        eval: &(dyn Fn(&PerturbationSpec) -> Option<Perturbation> + Sync),
    ) -> Vec<Option<Perturbation>> {
        parallel_map(jobs.len(), self.threads, |i| eval(&jobs[i]))
    }
}
