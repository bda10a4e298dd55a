//! Decay rate from the survival curve of independent paths.

use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ensemble::InitialLaw;
use super::histogram::{estimate_qsd, sample_quantile_edges, tv_distance};
use super::QsdError;
use crate::engine::{Dynamics, EngineError, Purpose, RngStream, Status};
use crate::math::{ln, linear_fit};
use crate::parallel::map_indexed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambda0Config {
    pub n_paths: usize,
    pub horizon: f64,
    /// Spacing of the survival grid used in the fit.
    pub fit_step: f64,
    /// Spacing of the conditional-law checks for the window rule.
    pub check_step: f64,
    pub seed: u64,
    pub bootstrap: usize,
    /// Window opens when TV between the conditional laws at `t` and
    /// `t − lag` falls below `tv_threshold`.
    pub tv_threshold: f64,
    pub lag: f64,
    /// Window closes when fewer survivors remain.
    pub min_survivors: usize,
    pub bins: usize,
}

impl Lambda0Config {
    pub fn new(n_paths: usize, horizon: f64, seed: u64) -> Self {
        Self {
            n_paths,
            horizon,
            fit_step: 0.05,
            check_step: 0.25,
            seed,
            bootstrap: 200,
            tv_threshold: 0.05,
            lag: 1.0,
            min_survivors: 100,
            bins: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lambda0Estimate {
    pub lambda0: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub stderr: f64,
    pub window_start: f64,
    pub window_end: f64,
    pub r2: f64,
    /// `(t, survival fraction)` on the fit grid.
    pub survival: Vec<(f64, f64)>,
    pub n_paths: usize,
}

fn survival_at(sorted_deaths: &[f64], t: f64) -> f64 {
    let n = sorted_deaths.len();
    (n - sorted_deaths.partition_point(|&d| d <= t)) as f64 / n as f64
}

fn slope_on(sorted_deaths: &[f64], ts: &[f64]) -> Option<(f64, f64)> {
    let mut xs = Vec::with_capacity(ts.len());
    let mut ys = Vec::with_capacity(ts.len());
    for &t in ts {
        let s = survival_at(sorted_deaths, t);
        if s > 0.0 {
            xs.push(t);
            ys.push(-ln(s));
        }
    }
    if xs.len() < 3 {
        return None;
    }
    linear_fit(&xs, &ys).map(|(slope, _, r2)| (slope, r2))
}

/// Least-squares slope of `−log S(t)` over the quasi-stationary window,
/// with a path-level bootstrap interval.
pub fn estimate_lambda0<D: Dynamics>(model: &D, x0: &InitialLaw, cfg: &Lambda0Config) -> Result<Lambda0Estimate, QsdError> {
    let n_checks = libm::floor(cfg.horizon / cfg.check_step + 1e-9) as usize;
    let checks: Vec<f64> = (1..=n_checks).map(|k| k as f64 * cfg.check_step).collect();
    let base = RngStream::new(cfg.seed, 0);
    let runs: Vec<Result<(f64, Vec<f64>), EngineError>> = map_indexed(cfg.n_paths, |i| {
        let st = base.with_index(i as u64);
        let mut s = model.start(x0.sample(st), st)?;
        let mut pos = Vec::with_capacity(checks.len());
        let mut death = f64::INFINITY;
        for &t in &checks {
            match model.advance(&mut s, t)? {
                Status::Alive => pos.push(model.position(&s)),
                Status::Absorbed { time, .. } => {
                    death = time;
                    break;
                }
            }
        }
        if death.is_infinite() && model.time(&s) < cfg.horizon {
            if let Status::Absorbed { time, .. } = model.advance(&mut s, cfg.horizon)? {
                death = time;
            }
        }
        Ok((death, pos))
    });
    let mut deaths = Vec::with_capacity(cfg.n_paths);
    let mut at: Vec<Vec<f64>> = alloc::vec![Vec::new(); checks.len()];
    for r in runs {
        let (d, pos) = r.map_err(QsdError::Engine)?;
        deaths.push(d);
        for (k, p) in pos.into_iter().enumerate() {
            at[k].push(p);
        }
    }
    let mut sorted = deaths.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));

    // Window start: conditional law settles.
    let lag_k = libm::round(cfg.lag / cfg.check_step).max(1.0) as usize;
    let mut start = None;
    for k in lag_k..checks.len() {
        let (a, b) = (&at[k], &at[k - lag_k]);
        if a.len() < cfg.min_survivors {
            break;
        }
        let edges = sample_quantile_edges(a, cfg.bins);
        let tv = tv_distance(&estimate_qsd(a, &edges)?, &estimate_qsd(b, &edges)?)?;
        if tv < cfg.tv_threshold {
            start = Some(checks[k]);
            break;
        }
    }
    let min_frac = cfg.min_survivors as f64 / cfg.n_paths as f64;
    let start = match start {
        Some(s) => s,
        None => {
            return Err(if survival_at(&sorted, cfg.horizon) < min_frac {
                QsdError::HorizonTooLong
            } else {
                QsdError::InsufficientWindow { points: 0 }
            })
        }
    };
    let n_fit = libm::floor(cfg.horizon / cfg.fit_step + 1e-9) as usize;
    let grid: Vec<f64> = (0..=n_fit).map(|k| k as f64 * cfg.fit_step).collect();
    let end = grid.iter().cloned().filter(|&t| survival_at(&sorted, t) >= min_frac).fold(0.0, f64::max);
    let ts: Vec<f64> = grid.iter().cloned().filter(|&t| t >= start - 1e-12 && t <= end + 1e-12).collect();
    let (lambda0, r2) = slope_on(&sorted, &ts).ok_or(QsdError::InsufficientWindow { points: ts.len() })?;

    let boot_base = RngStream::new(cfg.seed, u64::MAX);
    let n = deaths.len();
    let mut boots: Vec<f64> = map_indexed(cfg.bootstrap, |b| {
        let mut r = boot_base.with_index(b as u64).rng(Purpose::Bootstrap);
        let mut res: Vec<f64> = (0..n).map(|_| deaths[r.random_range(0..n)]).collect();
        res.sort_by(|a, b| a.total_cmp(b));
        slope_on(&res, &ts).map(|s| s.0).unwrap_or(f64::NAN)
    })
    .into_iter()
    .filter(|v| v.is_finite())
    .collect();
    boots.sort_by(|a, b| a.total_cmp(b));
    let (lo, hi, se) = if boots.len() >= 10 {
        let q = |p: f64| boots[((boots.len() - 1) as f64 * p) as usize];
        let m = boots.iter().sum::<f64>() / boots.len() as f64;
        let var = boots.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (boots.len() - 1) as f64;
        (q(0.025), q(0.975), libm::sqrt(var))
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    Ok(Lambda0Estimate {
        lambda0,
        ci_low: lo,
        ci_high: hi,
        stderr: se,
        window_start: start,
        window_end: end,
        r2,
        survival: grid.iter().map(|&t| (t, survival_at(&sorted, t))).collect(),
        n_paths: cfg.n_paths,
    })
}
