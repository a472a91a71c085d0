//! Execution strategy for the data-parallel generation loops (one item per
//! document, segment or gold context).
//!
//! With the `parallel` feature (default) work runs on rayon; without it every
//! call degrades to a plain sequential iterator. Output order always matches
//! input order, so results are identical in both modes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// `threads == 0` uses rayon's global pool.
    #[cfg(feature = "parallel")]
    Parallel { threads: usize },
}

impl Default for Execution {
    fn default() -> Self {
        Self::with_threads(0)
    }
}

impl Execution {
    /// Parallel when the feature is compiled in, sequential otherwise.
    pub fn with_threads(threads: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            if threads == 1 {
                Execution::Sequential
            } else {
                Execution::Parallel { threads }
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = threads;
            Execution::Sequential
        }
    }

    pub fn is_parallel(self) -> bool {
        !matches!(self, Execution::Sequential)
    }

    /// Map `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel { threads } => {
                use rayon::prelude::*;
                let run = || items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
                if threads == 0 {
                    run()
                } else {
                    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                        Ok(pool) => pool.install(run),
                        Err(e) => {
                            log::warn!("falling back to global rayon pool: {e}");
                            run()
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_in_every_mode() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Execution::Sequential.map(&items, |i, x| x * 2 + i as u64);
        let par = Execution::with_threads(4).map(&items, |i, x| x * 2 + i as u64);
        assert_eq!(seq, par);
        assert_eq!(seq[10], 30);
    }
}
