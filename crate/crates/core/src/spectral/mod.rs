//! Spectral oracle on a finite-volume discretization.

mod assumption;
mod eigen;
mod generator;
mod kernel;

pub use assumption::{verify_assumption_a, AssumptionAt, AssumptionReport};
pub use eigen::{lambda0_bracket, principal_eigenpair, principal_eigenpair_with, sturm_count, Bracket, EigenConfig, SpectralSolution};
pub use generator::{discretize_generator, DiscretizedGenerator, TopBoundary};
pub use kernel::{expm, qprocess_invariant, qprocess_kernel, qprocess_rates, transition_matrix, Matrix, EIGEN_DEFECT_TOL, KERNEL_ROW_TOL};

use crate::measures::MeasureError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error(transparent)]
    Measure(MeasureError),
    #[error("{0}")]
    Invalid(alloc::string::String),
    #[error("cell {index} at x = {x} has zero speed mass")]
    EmptyCell { index: usize, x: f64 },
    #[error("eigen iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { residual: f64, iterations: usize },
    #[error("Perron structure violated (component {component:e})")]
    PerronViolated { component: f64 },
    #[error("eigen data inconsistent with kernel (row sum off by {deviation:e})")]
    KernelInconsistent { deviation: f64 },
}
