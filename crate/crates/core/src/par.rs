//! Row-parallel execution with a sequential fallback.
//!
//! Every data-parallel loop in the crate goes through [`map_range`]. Results
//! are always collected in index order and reduced sequentially by the caller,
//! so parallel and sequential runs produce bit-identical output.
//!
//! With the `parallel` feature disabled everything runs on the calling thread.
//! With it enabled, [`with_execution`] can still force the sequential path for
//! the current thread (used by the benches and by determinism tests).

use std::cell::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Parallel,
    Sequential,
}

thread_local! {
    static MODE: Cell<Option<Execution>> = const { Cell::new(None) };
}

/// Execution mode in effect on this thread.
pub fn current() -> Execution {
    match MODE.with(|m| m.get()) {
        Some(mode) => effective(mode),
        None => effective(Execution::Parallel),
    }
}

fn effective(mode: Execution) -> Execution {
    if cfg!(feature = "parallel") {
        mode
    } else {
        Execution::Sequential
    }
}

/// Run `f` with the given execution mode on the current thread.
pub fn with_execution<R>(mode: Execution, f: impl FnOnce() -> R) -> R {
    let prev = MODE.with(|m| m.replace(Some(mode)));
    let out = f();
    MODE.with(|m| m.set(prev));
    out
}

/// `(0..n).map(f).collect()`, parallelized over indices when enabled.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match current() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Map over a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    map_range(items.len(), |i| f(&items[i]))
}
