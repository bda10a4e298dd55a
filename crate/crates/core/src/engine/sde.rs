//! Euler scheme in original coordinates with a trapezoidal killing clock.

use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AbsorptionOutcome, Dynamics, EngineError, OutcomeKind, PathSample, Purpose, RngStream, Status};
use crate::math::sqrt;
use crate::measures::DiffusionSpec;
use crate::RealFn;

/// Jump extension: at rate `rate`, jump by `size` if the state is `≥ threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRule {
    pub rate: f64,
    pub size: f64,
    pub threshold: f64,
}

impl Default for JumpRule {
    fn default() -> Self {
        Self { rate: 1.0, size: 1.0, threshold: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Record {
    Endpoints,
    Every(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeOptions {
    pub dt: f64,
    pub delta_abs: f64,
    /// Reflect at this level when a diffusion step crosses it from below.
    pub y_max: Option<f64>,
    pub record: Record,
    pub jumps: Option<JumpRule>,
}

impl SdeOptions {
    pub fn new(dt: f64) -> Self {
        Self { dt, delta_abs: 1e-6, y_max: None, record: Record::Endpoints, jumps: None }
    }

    /// Reflection at the entrance truncation level of `spec`, if it has one.
    pub fn for_spec(spec: &DiffusionSpec, dt: f64) -> Self {
        Self { y_max: spec.entrance_truncation(1e-12), ..Self::new(dt) }
    }
}

/// Coefficients of `dY = σ dB + b dt`, killed at rate `κ + extra_kill`.
#[derive(Clone)]
pub struct SdeModel {
    pub sigma: RealFn,
    pub drift: RealFn,
    pub kill: RealFn,
    pub extra_kill: f64,
    pub opts: SdeOptions,
}

impl SdeModel {
    pub fn new(spec: &DiffusionSpec, opts: SdeOptions) -> Result<Self, EngineError> {
        let sde = spec.sde.as_ref().ok_or(EngineError::NoSdeForm)?;
        if spec.killing.has_atoms() {
            return Err(EngineError::AtomicKilling);
        }
        if !(opts.dt > 0.0) {
            return Err(EngineError::Invalid("dt must be positive".into()));
        }
        Ok(Self { sigma: sde.sigma.clone(), drift: sde.drift.clone(), kill: sde.kill_rate.clone(), extra_kill: 0.0, opts })
    }

    pub fn with_extra_killing(mut self, c: f64) -> Self {
        self.extra_kill += c;
        self
    }

    fn kappa(&self, y: f64) -> Result<f64, EngineError> {
        let k = (self.kill)(y) + self.extra_kill;
        if k.is_finite() {
            Ok(k)
        } else {
            Err(EngineError::KillRateNotFinite { state: y })
        }
    }
}

#[derive(Clone)]
pub struct SdeState {
    pub y: f64,
    pub t: f64,
    pub clock: f64,
    pub threshold: f64,
    pub next_jump: f64,
    pub jumps: u32,
    stream: RngStream,
    bm: ChaCha8Rng,
    kill_draws: u64,
    jump_draws: u64,
}

impl SdeState {
    fn new_threshold(&mut self) {
        self.threshold = self.stream.exp1_at(Purpose::Killing, self.kill_draws);
        self.kill_draws += 1;
        self.clock = 0.0;
    }

    fn draw_jump(&mut self, rate: f64) {
        self.next_jump = self.t + self.stream.exp1_at(Purpose::Jumps, self.jump_draws) / rate;
        self.jump_draws += 1;
    }
}

impl SdeModel {
    /// One Euler step of length `h`.
    fn step(&self, s: &mut SdeState, h: f64) -> Result<Status, EngineError> {
        let y = s.y;
        let b = (self.drift)(y);
        let sg = (self.sigma)(y);
        if !b.is_finite() || !sg.is_finite() || b * h < -y - sg * sqrt(h) * 8.0 {
            return Err(EngineError::StepTooLarge { t: s.t, state: y });
        }
        let xi: f64 = s.bm.sample(StandardNormal);
        let mut yn = y + b * h + sg * sqrt(h) * xi;
        if yn.is_nan() {
            return Err(EngineError::StepTooLarge { t: s.t, state: y });
        }
        if let Some(top) = self.opts.y_max {
            if yn > top && y <= top {
                yn = (2.0 * top - yn).max(0.5 * top);
            }
        }
        let d = self.opts.delta_abs;
        let k0 = self.kappa(y)?;
        if yn <= d {
            // Crossing of δ_abs, linear in the step.
            let frac = if y > yn { ((y - d) / (y - yn)).clamp(0.0, 1.0) } else { 1.0 };
            let k1 = self.kappa(d)?;
            let dc = 0.5 * (k0 + k1) * frac * h;
            if s.clock + dc >= s.threshold {
                let tk = s.t + frac * h * (s.threshold - s.clock) / dc;
                s.clock = s.threshold;
                s.t = tk;
                s.y = 0.0;
                return Ok(Status::Absorbed { kind: OutcomeKind::Killed, time: tk });
            }
            s.clock += dc;
            s.t += frac * h;
            s.y = 0.0;
            return Ok(Status::Absorbed { kind: OutcomeKind::Continuous, time: s.t });
        }
        let k1 = self.kappa(yn)?;
        let dc = 0.5 * (k0 + k1) * h;
        if s.clock + dc >= s.threshold {
            let tk = s.t + h * (s.threshold - s.clock) / dc;
            s.clock = s.threshold;
            s.t = tk;
            s.y = 0.0;
            return Ok(Status::Absorbed { kind: OutcomeKind::Killed, time: tk });
        }
        s.clock += dc;
        s.t += h;
        s.y = yn;
        if let Some(j) = &self.opts.jumps {
            while s.next_jump <= s.t {
                if s.y >= j.threshold {
                    s.y += j.size;
                    s.jumps += 1;
                }
                s.draw_jump(j.rate);
            }
        }
        Ok(Status::Alive)
    }
}

impl Dynamics for SdeModel {
    type State = SdeState;

    fn start(&self, y0: f64, stream: RngStream) -> Result<SdeState, EngineError> {
        if !(y0 > 0.0) {
            return Err(EngineError::Invalid("x0 must be positive".into()));
        }
        let mut s = SdeState {
            y: y0,
            t: 0.0,
            clock: 0.0,
            threshold: 0.0,
            next_jump: f64::INFINITY,
            jumps: 0,
            bm: stream.rng(Purpose::Brownian),
            stream,
            kill_draws: 0,
            jump_draws: 0,
        };
        s.new_threshold();
        if let Some(j) = &self.opts.jumps {
            s.draw_jump(j.rate);
        }
        Ok(s)
    }

    fn advance(&self, s: &mut SdeState, t_to: f64) -> Result<Status, EngineError> {
        let dt = self.opts.dt;
        while s.t < t_to {
            let rem = t_to - s.t;
            if rem <= 1e-12 * dt {
                s.t = t_to;
                break;
            }
            let last = rem < 1.5 * dt;
            match self.step(s, if last { rem } else { dt })? {
                Status::Alive => {}
                st => return Ok(st),
            }
            if last {
                s.t = t_to;
            }
        }
        Ok(Status::Alive)
    }

    fn position(&self, s: &SdeState) -> f64 {
        s.y
    }

    fn time(&self, s: &SdeState) -> f64 {
        s.t
    }

    fn respawn(&self, s: &mut SdeState, from: &SdeState) {
        s.y = from.y;
        s.t = from.t;
        s.new_threshold();
        if let Some(j) = &self.opts.jumps {
            s.draw_jump(j.rate);
        }
    }
}

/// Run one path of `model` from `x0` to `horizon`.
pub fn run_path<D: Dynamics>(
    model: &D,
    x0: f64,
    horizon: f64,
    stream: RngStream,
    record_dt: Option<f64>,
) -> Result<(PathSample, D::State), EngineError> {
    let mut s = model.start(x0, stream)?;
    let mut times = Vec::from([0.0]);
    let mut states = Vec::from([x0]);
    let slice = record_dt.unwrap_or(horizon);
    let mut k = 0u64;
    let outcome = loop {
        k += 1;
        let target = (k as f64 * slice).min(horizon);
        match model.advance(&mut s, target)? {
            Status::Alive => {
                times.push(model.time(&s));
                states.push(model.position(&s));
                if target >= horizon {
                    break AbsorptionOutcome { kind: OutcomeKind::Alive, time: horizon, final_state: model.position(&s) };
                }
            }
            Status::Absorbed { kind, time } => {
                times.push(time);
                states.push(0.0);
                break AbsorptionOutcome { kind, time, final_state: 0.0 };
            }
        }
    };
    Ok((PathSample { times, states, outcome, killing_clock_final: 0.0, killing_threshold: 0.0, jumps: 0 }, s))
}

fn finish(model: &SdeModel, x0: f64, horizon: f64, stream: RngStream) -> Result<PathSample, EngineError> {
    let record_dt = match model.opts.record {
        Record::Endpoints => None,
        Record::Every(k) => Some(model.opts.dt * k.max(1) as f64),
    };
    let (mut p, s) = run_path(model, x0, horizon, stream, record_dt)?;
    p.killing_clock_final = s.clock;
    p.killing_threshold = s.threshold;
    p.jumps = s.jumps;
    Ok(p)
}

/// Euler path of an SDE spec with killing clock. Reflection at the
/// entrance truncation level when the spec has one.
pub fn simulate_sde_path(spec: &DiffusionSpec, x0: f64, horizon: f64, dt: f64, stream: RngStream) -> Result<PathSample, EngineError> {
    let model = SdeModel::new(spec, SdeOptions::for_spec(spec, dt))?;
    finish(&model, x0, horizon, stream)
}

/// As [`simulate_sde_path`] with a rate-1 clock of `+1` jumps active above 1.
pub fn simulate_with_jumps(spec: &DiffusionSpec, x0: f64, horizon: f64, dt: f64, stream: RngStream) -> Result<PathSample, EngineError> {
    let mut opts = SdeOptions::for_spec(spec, dt);
    opts.jumps = Some(JumpRule::default());
    let model = SdeModel::new(spec, opts)?;
    finish(&model, x0, horizon, stream)
}

impl SdeModel {
    pub fn path(&self, x0: f64, horizon: f64, stream: RngStream) -> Result<PathSample, EngineError> {
        finish(self, x0, horizon, stream)
    }
}
