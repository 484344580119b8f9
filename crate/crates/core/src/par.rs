//! Data-parallel iteration with a sequential fallback.
//!
//! With the `parallel` feature the rayon traits are re-exported. Without it,
//! shim traits provide the same method names over ordinary iterators, so call
//! sites compile unchanged in both builds.

#[cfg(feature = "parallel")]
pub use rayon::prelude::{IndexedParallelIterator, IntoParallelIterator, ParallelIterator};

#[cfg(not(feature = "parallel"))]
pub use fallback::*;

#[cfg(not(feature = "parallel"))]
mod fallback {
    pub trait IntoParallelIterator {
        type Iter: Iterator<Item = Self::Item>;
        type Item;
        fn into_par_iter(self) -> Self::Iter;
    }

    impl<I: IntoIterator> IntoParallelIterator for I {
        type Iter = I::IntoIter;
        type Item = I::Item;
        fn into_par_iter(self) -> Self::Iter {
            self.into_iter()
        }
    }

    pub trait ParallelIterator: Iterator {}
    impl<I: Iterator> ParallelIterator for I {}

    pub trait IndexedParallelIterator: Iterator {}
    impl<I: Iterator> IndexedParallelIterator for I {}
}

/// Whether this build runs loops on the rayon pool.
pub const ENABLED: bool = cfg!(feature = "parallel");
