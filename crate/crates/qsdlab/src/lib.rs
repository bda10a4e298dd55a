//! Experiment runner: TOML configs, task dispatch, reports and the
//! acceptance suite.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod model;
pub mod report;
pub mod tasks;
pub mod validate;

pub use config::{ConfigError, ExperimentConfig, Task};
pub use tasks::run_task;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("{0} acceptance criteria failed")]
    Validation(usize),
    #[error("cannot build thread pool: {0}")]
    Threads(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Io(_) | RunError::Threads(_) => 1,
            RunError::Validation(_) => 2,
            RunError::Numeric(_) => 3,
            RunError::Config(_) => 4,
        }
    }
}

/// Run `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T, RunError> + Send) -> Result<T, RunError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().map_err(|e| RunError::Threads(e.to_string()))?;
    pool.install(f)
}
