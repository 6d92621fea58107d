//! Data-parallel helpers for the numeric kernels and batch evaluation.
//!
//! With the `parallel` feature the helpers fan work out over rayon when the
//! calling thread's [`Execution`] mode is `Parallel` and the work is large
//! enough to amortize scheduling. Without the feature, or in `Sequential`
//! mode, the same closures run in order on the calling thread. Both paths
//! visit the same chunks with the same arithmetic, so results are bitwise
//! identical.

use std::cell::Cell;

/// Minimum number of scalar multiply-adds before a kernel goes parallel.
pub const PARALLEL_WORK_THRESHOLD: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

thread_local! {
    static MODE: Cell<Execution> = const { Cell::new(Execution::Parallel) };
}

impl Execution {
    pub fn current() -> Execution {
        MODE.with(|m| m.get())
    }

    /// Whether rayon is compiled in at all.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Runs `f` with the calling thread's execution mode set to `mode`.
pub fn with_execution<R>(mode: Execution, f: impl FnOnce() -> R) -> R {
    let prev = MODE.with(|m| m.replace(mode));
    let out = f();
    MODE.with(|m| m.set(prev));
    out
}

#[cfg(feature = "parallel")]
#[inline]
fn go_parallel(work: usize) -> bool {
    work >= PARALLEL_WORK_THRESHOLD && Execution::current() == Execution::Parallel
}

/// Applies `f(chunk_index, chunk)` to consecutive `chunk`-sized pieces of `out`.
pub fn for_each_chunk<F>(out: &mut [f64], chunk: usize, work: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if chunk == 0 || out.is_empty() {
        return;
    }
    #[cfg(feature = "parallel")]
    if go_parallel(work) {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = work;
    out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Order-preserving map over a slice.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if cfg!(feature = "parallel") && Execution::current() == Execution::Parallel && items.len() > 1 {
        use rayon::prelude::*;
        return items.par_iter().map(&f).collect();
    }
    items.iter().map(f).collect()
}
