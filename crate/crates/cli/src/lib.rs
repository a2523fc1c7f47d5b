//! Experiment harness around [`eimvr`]: ensemble generation, paired
//! surrogate and full-field solves, control-variate estimation, contrast
//! sweeps, family discrimination and validation of the influence tensors.
//!
//! Every command is available as a library function returning its results;
//! the `eimvr` binary is a thin wrapper around them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{ExperimentConfig, Overrides, SchemeChoice};
pub use error::{CliError, Result};

/// Runs `f` on a pool of `threads` workers (0 uses every core).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}
