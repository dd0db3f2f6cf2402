//! Sequential and rayon-backed execution of batch reductions.
//!
//! Every reduction splits its input into fixed chunks of [`REDUCTION_CHUNK`]
//! items, folds each chunk left to right, and then combines the chunk results
//! left to right. The chunk boundaries do not depend on the thread count, so
//! [`Execution::Sequential`] and [`Execution::Parallel`] produce bit-identical
//! floating-point results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of items folded together before partial results are combined.
pub const REDUCTION_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

#[allow(clippy::derivable_impls)]
impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Execution::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Chunked fold over `items`. Returns `None` for an empty slice.
    pub fn chunked_fold<T, A, I, F, C>(self, items: &[T], init: I, fold: F, mut combine: C) -> Option<A>
    where
        T: Sync,
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, &T) + Sync,
        C: FnMut(&mut A, A),
    {
        let fold_chunk = |chunk: &[T]| {
            let mut acc = init();
            for item in chunk {
                fold(&mut acc, item);
            }
            acc
        };
        match self {
            Execution::Sequential => {
                let mut chunks = items.chunks(REDUCTION_CHUNK);
                let mut acc = fold_chunk(chunks.next()?);
                for chunk in chunks {
                    combine(&mut acc, fold_chunk(chunk));
                }
                Some(acc)
            }
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                let partials: Vec<A> = items.par_chunks(REDUCTION_CHUNK).map(fold_chunk).collect();
                let mut partials = partials.into_iter();
                let mut acc = partials.next()?;
                for p in partials {
                    combine(&mut acc, p);
                }
                Some(acc)
            }
        }
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
        }
    }
}
