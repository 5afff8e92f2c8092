//! Synthetic experiment suites, sweeps, configuration and serialization.

pub mod config;
pub mod data;
pub mod gram;
pub mod output;
pub mod seed;
pub mod sweep;

use crate::error::{Error, Result};

/// Environment variable holding the worker-thread count for sweeps.
pub const THREADS_ENV: &str = "REFLECTRON_THREADS";

/// Thread pool sized by `REFLECTRON_THREADS`, defaulting to the available parallelism.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Error::Config(format!("{THREADS_ENV} must be positive")));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))
}
