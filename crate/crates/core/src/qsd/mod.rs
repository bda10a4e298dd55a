//! QSD estimation from particle ensembles.

mod ensemble;
mod eta;
mod histogram;
mod interp;
mod lambda0;
mod qprocess;
mod rate;

pub use ensemble::{evolve_conditioned_ensemble, EnsembleConfig, EnsembleMode, InitialLaw, ParticleEnsemble, Snapshot};
pub use eta::{estimate_eta, EtaConfig, EtaEstimate};
pub use histogram::{estimate_qsd, quantile_edges, sample_quantile_edges, tv_distance, tv_noise_floor, Histogram};
pub use interp::MonotoneCubic;
pub use lambda0::{estimate_lambda0, Lambda0Config, Lambda0Estimate};
pub use qprocess::{occupation, simulate_qprocess, Eigenfunction};
pub use rate::{fit_convergence_rate, RateFit};

use crate::engine::EngineError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QsdError {
    #[error("ensemble extinct at t = {t}; increase n_particles")]
    Extinct { t: f64 },
    #[error("horizon too long for n_paths")]
    HorizonTooLong,
    #[error("insufficient decay window ({points} usable points)")]
    InsufficientWindow { points: usize },
    #[error("fitted curve does not decay (slope {slope})")]
    NoDecay { slope: f64 },
    #[error("invalid eigenfunction at {at}")]
    InvalidEigenfunction { at: f64 },
    #[error("{0}")]
    Invalid(alloc::string::String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}
