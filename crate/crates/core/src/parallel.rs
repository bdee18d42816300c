//! Fixed-size worker pool for independent block computations.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{Error, Result};

/// Runs per-block closures either inline or on a dedicated thread pool.
///
/// Results always come back in block order, so reductions performed by the
/// caller do not depend on the worker count.
pub struct Workers {
    count: usize,
    pool: Option<ThreadPool>,
}

impl Workers {
    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Usage("worker count must be at least 1".into()));
        }
        let pool = if count > 1 {
            Some(
                ThreadPoolBuilder::new()
                    .num_threads(count)
                    .build()
                    .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self { count, pool })
    }

    pub fn sequential() -> Self {
        Self {
            count: 1,
            pool: None,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `(0..len).map(f)` with the calls spread over the workers.
    pub fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            None => (0..len).map(f).collect(),
            Some(pool) => pool.install(|| {
                (0..len)
                    .into_par_iter()
                    .with_max_len(1)
                    .map(f)
                    .collect()
            }),
        }
    }
}

impl std::fmt::Debug for Workers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workers").field("count", &self.count).finish()
    }
}
