//! Row-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (default) work is split across the rayon pool;
//! without it, or with [`Execution::Sequential`], the same closures run in
//! order on the calling thread. Results are identical either way: each row or
//! chunk is computed independently from immutable inputs.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Execution {
    /// Every execution mode compiled into this build.
    pub fn available() -> &'static [Execution] {
        #[cfg(feature = "parallel")]
        {
            &[Execution::Sequential, Execution::Parallel]
        }
        #[cfg(not(feature = "parallel"))]
        {
            &[Execution::Sequential]
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Execution::Sequential => "sequential",
            #[cfg(feature = "parallel")]
            Execution::Parallel => "parallel",
        }
    }

    /// Calls `f(i, slot)` for every element of `out`.
    pub fn for_each_indexed<T, F>(self, out: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        match self {
            Execution::Sequential => out.iter_mut().enumerate().for_each(|(i, v)| f(i, v)),
            #[cfg(feature = "parallel")]
            Execution::Parallel => out.par_iter_mut().enumerate().for_each(|(i, v)| f(i, v)),
        }
    }

    /// Calls `f(i, row)` for every `row_len`-sized chunk of `out`.
    pub fn for_each_row<T, F>(self, out: &mut [T], row_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        match self {
            Execution::Sequential => out
                .chunks_mut(row_len)
                .enumerate()
                .for_each(|(i, row)| f(i, row)),
            #[cfg(feature = "parallel")]
            Execution::Parallel => out
                .par_chunks_mut(row_len)
                .enumerate()
                .for_each(|(i, row)| f(i, row)),
        }
    }

    /// `(0..n).map(f).collect()`, preserving order.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }
}
