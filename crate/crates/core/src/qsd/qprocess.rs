//! Q-process: the killed dynamics tilted by `η`.

use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

use super::interp::MonotoneCubic;
use super::QsdError;
use crate::engine::{AbsorptionOutcome, Dynamics, OutcomeKind, PathSample, Purpose, RngStream, SdeModel, Status};
use crate::math::{exp, sqrt};

/// A positive eigenfunction with cheap local maxima.
pub trait Eigenfunction: Sync {
    fn eval(&self, y: f64) -> f64;
    /// An upper bound of the function on `[a, b]`.
    fn max_on(&self, a: f64, b: f64) -> f64;
}

impl Eigenfunction for MonotoneCubic {
    fn eval(&self, y: f64) -> f64 {
        MonotoneCubic::eval(self, y)
    }
    fn max_on(&self, a: f64, b: f64) -> f64 {
        MonotoneCubic::max_on(self, a, b)
    }
}

const MAX_TRIES: usize = 1_000_000;

/// Each step proposes an Euler step of the killed process, rejects it if it
/// is absorbed or killed (per-step survival `e^{−κ̄Δt}`), and accepts it
/// with probability `η(y′)/sup η` over the ±6σ√Δt proposal range. The
/// factor `e^{λ₀Δt}` is common to all proposals and drops out, so the
/// accepted steps follow `e^{λ₀Δt} η(y′)/η(y) p(y, dy′)`.
pub fn simulate_qprocess<E: Eigenfunction>(
    model: &SdeModel,
    eta: &E,
    x0: f64,
    horizon: f64,
    stream: RngStream,
    record_every: usize,
) -> Result<PathSample, QsdError> {
    let eta0 = eta.eval(x0);
    if !(eta0 > 0.0) {
        return Err(QsdError::InvalidEigenfunction { at: x0 });
    }
    let opts = &model.opts;
    let mut bm = stream.rng(Purpose::Brownian);
    let mut acc = stream.rng(Purpose::Resample);
    let steps = libm::ceil(horizon / opts.dt - 1e-9) as usize;
    let h = horizon / steps as f64;
    let rec = record_every.max(1);
    let mut times = Vec::with_capacity(steps / rec + 2);
    let mut states = Vec::with_capacity(steps / rec + 2);
    times.push(0.0);
    states.push(x0);
    let mut y = x0;
    for k in 1..=steps {
        let b = (model.drift)(y);
        let sg = (model.sigma)(y);
        let spread = 6.0 * sg * sqrt(h);
        let lo = (y + b * h - spread).max(opts.delta_abs);
        let mut hi = y + b * h + spread;
        if let Some(top) = opts.y_max {
            hi = hi.min(top);
        }
        let bound = eta.max_on(lo, hi.max(lo));
        let k0 = (model.kill)(y) + model.extra_kill;
        let mut tries = 0;
        let yn = loop {
            tries += 1;
            if tries > MAX_TRIES {
                return Err(QsdError::Invalid(alloc::format!("Q-process proposals keep failing at y = {y}")));
            }
            let xi: f64 = bm.sample(StandardNormal);
            let mut yn = y + b * h + sg * sqrt(h) * xi;
            if let Some(top) = opts.y_max {
                if yn > top && y <= top {
                    yn = (2.0 * top - yn).max(0.5 * top);
                }
            }
            if !(yn > opts.delta_abs) {
                continue;
            }
            let kbar = 0.5 * (k0 + (model.kill)(yn) + model.extra_kill);
            if acc.random::<f64>() > exp(-kbar * h) {
                continue;
            }
            let e = eta.eval(yn);
            if !(e > 0.0) {
                return Err(QsdError::InvalidEigenfunction { at: yn });
            }
            if acc.random::<f64>() * bound.max(e) < e {
                break yn;
            }
        };
        y = yn;
        if k % rec == 0 || k == steps {
            times.push(k as f64 * h);
            states.push(y);
        }
    }
    Ok(PathSample {
        times,
        states,
        outcome: AbsorptionOutcome { kind: OutcomeKind::Alive, time: horizon, final_state: y },
        killing_clock_final: 0.0,
        killing_threshold: f64::INFINITY,
        jumps: 0,
    })
}

/// Occupation counts in the bins `edges`, sampling the position every
/// `sample_dt` after `burn_in`.
pub fn occupation<D: Dynamics>(
    model: &D,
    x0: f64,
    horizon: f64,
    sample_dt: f64,
    burn_in: f64,
    stream: RngStream,
    edges: &[f64],
) -> Result<Vec<f64>, QsdError> {
    let mut s = model.start(x0, stream).map_err(QsdError::Engine)?;
    let nb = edges.len() - 1;
    let mut counts = alloc::vec![0.0; nb];
    let n = libm::floor(horizon / sample_dt + 1e-9) as usize;
    for k in 1..=n {
        let t = k as f64 * sample_dt;
        match model.advance(&mut s, t).map_err(QsdError::Engine)? {
            Status::Alive => {}
            Status::Absorbed { time, .. } => return Err(QsdError::Invalid(alloc::format!("tilted path absorbed at t = {time}"))),
        }
        if t < burn_in {
            continue;
        }
        let y = model.position(&s);
        let j = match edges.partition_point(|&e| e <= y) {
            0 => 0,
            j => (j - 1).min(nb - 1),
        };
        counts[j] += 1.0;
    }
    Ok(counts)
}
