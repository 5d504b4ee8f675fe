//! Switch between rayon data parallelism and plain iteration.
//!
//! Without the `parallel` feature every helper here runs sequentially, so the
//! crate builds and behaves identically (bit-for-bit) either way.

/// Row count above which [`Execution::Auto`] parallelizes sparse products.
pub const PARALLEL_ROW_THRESHOLD: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Auto,
    Sequential,
    Parallel,
}

impl Execution {
    /// Whether a product over `rows` rows should be split across threads.
    pub fn parallel_rows(self, rows: usize) -> bool {
        cfg!(feature = "parallel")
            && match self {
                Execution::Auto => rows >= PARALLEL_ROW_THRESHOLD,
                Execution::Sequential => false,
                Execution::Parallel => true,
            }
    }
}

/// Apply `f` to every item, in parallel when the feature is enabled.
/// Output order always matches input order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Fill `out[i] = f(i)`, in parallel when requested and available.
pub(crate) fn fill<R, F>(out: &mut [R], parallel: bool, f: F)
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
        return;
    }
    let _ = parallel;
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}
