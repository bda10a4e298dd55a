//! Numerical laboratory for one-dimensional diffusions with killing.
//!
//! The crate is organised bottom-up:
//!
//! * [`measures`] holds speed/killing measures, scale functions, quadrature
//!   with divergence detection, and Feller boundary classification.
//! * [`criteria`] checks the integral conditions that guarantee exponential
//!   convergence to a unique quasi-stationary distribution (QSD).
//! * [`engine`] simulates killed paths (Euler scheme with a killing clock,
//!   birth-death chain on a grid, squared-Bessel functionals).
//! * [`qsd`] estimates the QSD, the decay rate, the eigenfunction and runs
//!   the Q-process from particle ensembles.
//! * [`spectral`] is the independent finite-difference oracle.
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is on.
//! The `parallel` feature spreads path simulation over a rayon pool; results
//! are bit-identical for any number of worker threads.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::should_implement_trait)]

extern crate alloc;

pub mod criteria;
pub mod engine;
pub mod grid;
pub mod math;
pub mod measures;
pub mod parallel;
pub mod qsd;
pub mod spectral;
pub mod zoo;

mod error;

pub use error::Error;

use alloc::sync::Arc;

/// Shared real function `(0, ∞) → ℝ`.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Wrap a closure as a [`RealFn`].
pub fn real_fn<F>(f: F) -> RealFn
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}
