//! Path engines: Euler scheme with a killing clock, birth–death chain on a
//! grid, jump extension and squared-Bessel functionals.

mod bessel;
mod chain;
mod rng;
mod sde;

pub use bessel::{coming_down_probability, feller_hitting_check, feller_hitting_exact, ComingDown, FellerScheme};
pub use chain::{simulate_chain_path, BirthDeath, ChainState};
pub use rng::{Purpose, RngStream};
pub use sde::{simulate_sde_path, simulate_with_jumps, JumpRule, Record, SdeModel, SdeOptions, SdeState};

use alloc::string::String;
use alloc::vec::Vec;
use serde::Serialize;

use crate::measures::MeasureError;
use crate::spectral::SpectralError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("step size too large at t = {t}, state {state}")]
    StepTooLarge { t: f64, state: f64 },
    #[error("killing rate not finite at state {state}")]
    KillRateNotFinite { state: f64 },
    #[error("spec has no SDE form")]
    NoSdeForm,
    #[error("the SDE engine does not support atoms in the killing measure; use the chain engine")]
    AtomicKilling,
    #[error("grid does not cover x0 = {x0}")]
    OutsideGrid { x0: f64 },
    #[error("truncate measure support")]
    UnboundedSupport,
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Alive,
    /// Reached 0 continuously.
    Continuous,
    /// The killing clock fired first.
    Killed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbsorptionOutcome {
    pub kind: OutcomeKind,
    /// Absorption time; the horizon when alive.
    pub time: f64,
    /// State at the horizon when alive, 0 otherwise.
    pub final_state: f64,
}

impl AbsorptionOutcome {
    pub fn survives(&self, t: f64) -> bool {
        self.kind == OutcomeKind::Alive || self.time > t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub outcome: AbsorptionOutcome,
    /// Accumulated killing clock at termination.
    pub killing_clock_final: f64,
    /// The `Exp(1)` level the clock is compared with.
    pub killing_threshold: f64,
    pub jumps: u32,
}

/// Status after advancing a particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    Alive,
    Absorbed { kind: OutcomeKind, time: f64 },
}

/// A Markov particle system that can be advanced in time slices.
pub trait Dynamics: Sync {
    type State: Clone + Send + Sync;
    /// Fresh particle at `y0` driven by `stream`.
    fn start(&self, y0: f64, stream: RngStream) -> Result<Self::State, EngineError>;
    /// Advance to `t_to` or absorption.
    fn advance(&self, s: &mut Self::State, t_to: f64) -> Result<Status, EngineError>;
    fn position(&self, s: &Self::State) -> f64;
    fn time(&self, s: &Self::State) -> f64;
    /// Move an absorbed particle to the position of `from`, with a fresh
    /// killing clock and its own noise.
    fn respawn(&self, s: &mut Self::State, from: &Self::State);
}

/// Monte Carlo estimate with a normal 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        let se = libm::sqrt(var / n as f64);
        Self { value: mean, stderr: se, ci_low: mean - 1.96 * se, ci_high: mean + 1.96 * se, n }
    }

    pub fn contains(&self, v: f64, k_se: f64) -> bool {
        (self.value - v).abs() <= k_se * self.stderr
    }
}
