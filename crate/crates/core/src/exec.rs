//! Execution modes for the data-parallel sections.
//!
//! Work is split into chunks keyed by chunk index; results are reduced in
//! chunk order, so [`ExecMode::Parallel`] and [`ExecMode::Sequential`]
//! produce bitwise-identical output and the answer never depends on thread
//! count. Requires crate feature `parallel` for actual parallelism; without
//! it, `Parallel` degrades to the sequential path.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") { ExecMode::Parallel } else { ExecMode::Sequential }
    }
}

/// Applies `f` to every chunk index in `0..n_chunks`, returning results in
/// chunk order regardless of mode.
pub fn map_chunks<T: Send>(
    n_chunks: usize,
    mode: ExecMode,
    f: impl Fn(usize) -> T + Sync + Send,
) -> Vec<T> {
    #[cfg(feature = "parallel")]
    if mode == ExecMode::Parallel {
        use rayon::prelude::*;
        return (0..n_chunks).into_par_iter().map(&f).collect();
    }
    let _ = mode;
    (0..n_chunks).map(f).collect()
}

/// Caps the global worker pool at `n` threads. Returns whether the cap was
/// applied; calling it after the pool already started (or without the
/// `parallel` feature) has no effect.
pub fn set_global_threads(n: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        false
    }
}
