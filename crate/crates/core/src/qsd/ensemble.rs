//! Conditioned particle ensembles.

use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::QsdError;
use crate::engine::{Dynamics, Purpose, RngStream, Status};
use crate::parallel::{map_indexed, zip_for_each_mut};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    FlemingViot,
    Renormalize,
}

/// Initial law of the particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialLaw {
    Dirac { at: f64 },
    /// Uniform choice among the given points.
    Empirical { points: Vec<f64> },
    /// Bin `k` chosen with probability `probs[k]`, then the point `points[k]`.
    Discrete { points: Vec<f64>, probs: Vec<f64> },
}

impl InitialLaw {
    pub fn sample(&self, stream: RngStream) -> f64 {
        match self {
            InitialLaw::Dirac { at } => *at,
            InitialLaw::Empirical { points } => {
                let mut r = stream.rng(Purpose::Initial);
                points[r.random_range(0..points.len())]
            }
            InitialLaw::Discrete { points, probs } => {
                let u = stream.uniform_at(Purpose::Initial, 0) * probs.iter().sum::<f64>();
                let mut acc = 0.0;
                for (p, w) in points.iter().zip(probs) {
                    acc += w;
                    if u <= acc {
                        return *p;
                    }
                }
                *points.last().unwrap()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_particles: usize,
    pub t_end: f64,
    /// Synchronization interval (resampling barrier).
    pub slice: f64,
    pub mode: EnsembleMode,
    pub seed: u64,
    /// Times at which the positions are stored.
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub positions: Vec<f64>,
    /// Fraction of the original particles alive (renormalize), or the
    /// product of per-slice survival fractions (Fleming–Viot).
    pub survival: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    pub time: f64,
    /// Survival renormalization carried by each particle.
    pub ancestral_weights: Vec<f64>,
    /// Number of resampling events.
    pub generation_log: usize,
    pub snapshots: Vec<Snapshot>,
    /// `(t, survival)` at the end of each slice.
    pub survival: Vec<(f64, f64)>,
}

fn slice_times(cfg: &EnsembleConfig) -> Vec<f64> {
    let n = libm::ceil(cfg.t_end / cfg.slice - 1e-9).max(1.0) as usize;
    let mut ts: Vec<f64> = (1..=n).map(|k| (k as f64 * cfg.slice).min(cfg.t_end)).collect();
    // Snapshot times join the barrier list.
    for &t in &cfg.snapshot_times {
        if t > 0.0 && t <= cfg.t_end {
            ts.push(t);
        }
    }
    ts.sort_by(|a, b| a.total_cmp(b));
    ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    ts
}

fn wants_snapshot(cfg: &EnsembleConfig, t: f64) -> bool {
    cfg.snapshot_times.iter().any(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
}

/// Evolve `n_particles` from `mu0` to `cfg.t_end`.
///
/// Fleming–Viot: after each slice, absorbed particles are moved, in index
/// order, onto uniformly chosen particles that survived the slice.
/// Renormalize: particles are independent; survivors represent the
/// conditional law.
pub fn evolve_conditioned_ensemble<D: Dynamics>(model: &D, mu0: &InitialLaw, cfg: &EnsembleConfig) -> Result<ParticleEnsemble, QsdError> {
    if cfg.n_particles < 2 {
        return Err(QsdError::Invalid("n_particles must be at least 2".into()));
    }
    if !(cfg.slice > 0.0) || !(cfg.t_end > 0.0) {
        return Err(QsdError::Invalid("slice and t_end must be positive".into()));
    }
    let base = RngStream::new(cfg.seed, 0);
    let starts: Vec<Result<D::State, _>> = map_indexed(cfg.n_particles, |i| {
        let st = base.with_index(i as u64);
        model.start(mu0.sample(st), st)
    });
    let mut states = Vec::with_capacity(cfg.n_particles);
    for s in starts {
        states.push(s?);
    }
    let mut snapshots = Vec::new();
    if wants_snapshot(cfg, 0.0) {
        snapshots.push(Snapshot { t: 0.0, positions: states.iter().map(|s| model.position(s)).collect(), survival: 1.0 });
    }
    match cfg.mode {
        EnsembleMode::FlemingViot => fleming_viot(model, cfg, states, snapshots),
        EnsembleMode::Renormalize => renormalize(model, cfg, states, snapshots),
    }
}

fn fleming_viot<D: Dynamics>(
    model: &D,
    cfg: &EnsembleConfig,
    mut states: Vec<D::State>,
    mut snapshots: Vec<Snapshot>,
) -> Result<ParticleEnsemble, QsdError> {
    let n = states.len();
    let mut picker = RngStream::new(cfg.seed, 0).rng(Purpose::Resample);
    let mut status: Vec<Result<Status, crate::engine::EngineError>> = (0..n).map(|_| Ok(Status::Alive)).collect();
    let mut survival = 1.0;
    let mut curve = Vec::new();
    let mut events = 0usize;
    let mut weights = alloc::vec![1.0; n];
    for t in slice_times(cfg) {
        zip_for_each_mut(&mut states, &mut status, |_, s, st| *st = model.advance(s, t));
        let mut alive = Vec::with_capacity(n);
        let mut dead = Vec::new();
        for (i, st) in status.iter().enumerate() {
            match st {
                Ok(Status::Alive) => alive.push(i),
                Ok(Status::Absorbed { .. }) => dead.push(i),
                Err(e) => return Err(QsdError::Engine(e.clone())),
            }
        }
        if alive.is_empty() {
            return Err(QsdError::Extinct { t });
        }
        let frac = alive.len() as f64 / n as f64;
        survival *= frac;
        for &i in &dead {
            let j = alive[picker.random_range(0..alive.len())];
            let from = states[j].clone();
            model.respawn(&mut states[i], &from);
            // Respawned particles sit at the barrier time.
            events += 1;
        }
        if !dead.is_empty() {
            weights.iter_mut().for_each(|w| *w *= frac);
        }
        curve.push((t, survival));
        if wants_snapshot(cfg, t) {
            snapshots.push(Snapshot { t, positions: states.iter().map(|s| model.position(s)).collect(), survival });
        }
    }
    Ok(ParticleEnsemble {
        positions: states.iter().map(|s| model.position(s)).collect(),
        time: cfg.t_end,
        ancestral_weights: weights,
        generation_log: events,
        snapshots,
        survival: curve,
    })
}

fn renormalize<D: Dynamics>(
    model: &D,
    cfg: &EnsembleConfig,
    states: Vec<D::State>,
    mut snapshots: Vec<Snapshot>,
) -> Result<ParticleEnsemble, QsdError> {
    let n = states.len();
    let times = slice_times(cfg);
    let mut snap_times: Vec<f64> = times.iter().cloned().filter(|&t| wants_snapshot(cfg, t)).collect();
    let end_wanted = snap_times.last().is_some_and(|&t| (t - cfg.t_end).abs() <= 1e-12 * cfg.t_end.max(1.0));
    if !end_wanted {
        snap_times.push(cfg.t_end);
    }
    // Each particle runs alone: its absorption time and its positions at
    // the snapshot times (NaN once absorbed).
    let runs: Vec<Result<(f64, Vec<f64>), crate::engine::EngineError>> = map_indexed(n, |i| {
        let mut s = states[i].clone();
        let mut pos = Vec::with_capacity(snap_times.len());
        let mut death = f64::INFINITY;
        for &t in &snap_times {
            if death.is_finite() {
                pos.push(f64::NAN);
                continue;
            }
            match model.advance(&mut s, t)? {
                Status::Alive => pos.push(model.position(&s)),
                Status::Absorbed { time, .. } => {
                    death = time;
                    pos.push(f64::NAN);
                }
            }
        }
        Ok((death, pos))
    });
    let mut deaths = Vec::with_capacity(n);
    let mut positions_at: Vec<Vec<f64>> = alloc::vec![Vec::new(); snap_times.len()];
    for r in runs {
        let (d, pos) = r.map_err(QsdError::Engine)?;
        deaths.push(d);
        for (k, p) in pos.into_iter().enumerate() {
            if !p.is_nan() {
                positions_at[k].push(p);
            }
        }
    }
    let mut sorted = deaths.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let surv = |t: f64| (n - sorted.partition_point(|&d| d <= t)) as f64 / n as f64;
    let curve: Vec<(f64, f64)> = times.iter().map(|&t| (t, surv(t))).collect();
    let extinct_at = curve.iter().find(|c| c.1 == 0.0).map(|c| c.0);
    if let Some(t) = extinct_at {
        return Err(QsdError::Extinct { t });
    }
    let final_pos = positions_at.last().cloned().unwrap_or_default();
    let keep = if end_wanted { snap_times.len() } else { snap_times.len() - 1 };
    for (t, pos) in snap_times.iter().zip(positions_at).take(keep) {
        snapshots.push(Snapshot { t: *t, survival: surv(*t), positions: pos });
    }
    let s_end = surv(cfg.t_end);
    Ok(ParticleEnsemble {
        ancestral_weights: alloc::vec![1.0 / s_end; final_pos.len()],
        positions: final_pos,
        time: cfg.t_end,
        generation_log: 0,
        snapshots,
        survival: curve,
    })
}
