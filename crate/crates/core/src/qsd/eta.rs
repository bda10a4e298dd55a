//! Right eigenfunction from survival probabilities.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::interp::MonotoneCubic;
use super::QsdError;
use crate::engine::{Dynamics, EngineError, RngStream, Status};
use crate::math::exp;
use crate::parallel::map_indexed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaConfig {
    pub x_grid: Vec<f64>,
    pub t_star: f64,
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaEstimate {
    pub x: Vec<f64>,
    /// Normalized `η̂`.
    pub eta: Vec<f64>,
    /// Standard errors, same normalization.
    pub stderr: Vec<f64>,
    /// Survival fractions at `t*`.
    pub survival: Vec<f64>,
    pub t_star: f64,
    pub lambda0: f64,
    /// Constant divided out so that `α(η̂) = 1`.
    pub norm_const: f64,
}

impl EtaEstimate {
    pub fn interpolant(&self) -> MonotoneCubic {
        MonotoneCubic::new(self.x.clone(), self.eta.clone())
    }

    /// Rescale so that `Σ wᵢ η̂(pᵢ) / Σ wᵢ = 1`.
    pub fn normalize_with(&mut self, points: &[f64], weights: Option<&[f64]>) -> Result<(), QsdError> {
        let f = self.interpolant();
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &p) in points.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[i]);
            num += w * f.eval(p);
            den += w;
        }
        let c = num / den;
        if !(c > 0.0) {
            return Err(QsdError::Invalid("cannot normalize η̂: zero α-average".into()));
        }
        self.eta.iter_mut().for_each(|v| *v /= c);
        self.stderr.iter_mut().for_each(|v| *v /= c);
        self.norm_const *= c;
        Ok(())
    }
}

/// `η̂(x) = e^{λ₀t*} P̂_x(t* < τ)`, then normalized by the ensemble
/// `alpha_points` (uniform weights).
pub fn estimate_eta<D: Dynamics>(model: &D, cfg: &EtaConfig, lambda0: f64, alpha_points: &[f64]) -> Result<EtaEstimate, QsdError> {
    if cfg.x_grid.is_empty() || cfg.x_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(QsdError::Invalid("x_grid must be non-empty and increasing".into()));
    }
    let nx = cfg.x_grid.len();
    let n = cfg.n_paths;
    let base = RngStream::new(RngStream::fork_seed(cfg.seed, 0xE7A), 0);
    let alive: Vec<Result<bool, EngineError>> = map_indexed(nx * n, |k| {
        let x = cfg.x_grid[k / n];
        let mut s = model.start(x, base.with_index(k as u64))?;
        Ok(matches!(model.advance(&mut s, cfg.t_star)?, Status::Alive))
    });
    let mut counts = alloc::vec![0usize; nx];
    for (k, a) in alive.into_iter().enumerate() {
        if a.map_err(QsdError::Engine)? {
            counts[k / n] += 1;
        }
    }
    let g = exp(lambda0 * cfg.t_star);
    let survival: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let eta: Vec<f64> = survival.iter().map(|p| g * p).collect();
    let stderr: Vec<f64> = survival.iter().map(|p| g * libm::sqrt(p * (1.0 - p) / n as f64)).collect();
    let mut est = EtaEstimate { x: cfg.x_grid.clone(), eta, stderr, survival, t_star: cfg.t_star, lambda0, norm_const: 1.0 };
    est.normalize_with(alpha_points, None)?;
    Ok(est)
}
