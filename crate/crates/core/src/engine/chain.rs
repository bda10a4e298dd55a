//! Continuous-time birth–death chain on grid nodes.
//!
//! From node `i` the chain leaves at rate `downᵢ + upᵢ + leakᵢ` (natural
//! scale makes the up/down split `(xᵢ−xᵢ₋₁)/(xᵢ₊₁−xᵢ₋₁)`), and the killing
//! clock grows at rate `kᵢ/mᵢ` while it sits there. Leaking means reaching
//! the absorbing point continuously.

use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::sde::run_path;
use super::{Dynamics, EngineError, OutcomeKind, PathSample, Purpose, RngStream, Status};
use crate::grid::Grid;
use crate::measures::{natural_scale_form, DiffusionSpec};
use crate::spectral::{discretize_generator, qprocess_rates, DiscretizedGenerator, SpectralSolution, TopBoundary};

#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeath {
    /// Node positions reported for the chain (original coordinates).
    pub y: Vec<f64>,
    /// Cell edges in the same coordinates; `x0` must fall inside.
    pub y_edges: Vec<f64>,
    pub down: Vec<f64>,
    pub up: Vec<f64>,
    pub leak: Vec<f64>,
    pub kill: Vec<f64>,
}

impl BirthDeath {
    pub fn from_generator(gen: &DiscretizedGenerator) -> Self {
        let n = gen.n();
        let (mut down, mut up, mut leak) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n {
            let (d, u) = gen.rates(i);
            down.push(d);
            up.push(u);
            leak.push(gen.leak(i));
        }
        Self { y: gen.grid.y.clone(), y_edges: gen.grid.y_edges.clone(), down, up, leak, kill: gen.kill_rate.clone() }
    }

    /// Chain of `spec` on `grid`.
    pub fn from_spec(spec: &DiffusionSpec, grid: &Grid) -> Result<Self, EngineError> {
        let nat = natural_scale_form(spec)?;
        let gen = discretize_generator(&nat, grid, TopBoundary::Reflecting).map_err(|e| match e {
            crate::spectral::SpectralError::EmptyCell { x, .. } => {
                EngineError::Invalid(alloc::format!("speed measure must charge every cell (empty cell at x = {x})"))
            }
            e => e.into(),
        })?;
        Ok(Self::from_generator(&gen))
    }

    /// The h-transformed chain `L̃ᵢⱼ = Lᵢⱼ ηⱼ/ηᵢ`; it is never absorbed.
    pub fn qprocess(sol: &SpectralSolution, gen: &DiscretizedGenerator) -> Self {
        let n = gen.n();
        let rates = qprocess_rates(sol, gen);
        Self {
            y: gen.grid.y.clone(),
            y_edges: gen.grid.y_edges.clone(),
            down: rates.iter().map(|r| r.0).collect(),
            up: rates.iter().map(|r| r.1).collect(),
            leak: alloc::vec![0.0; n],
            kill: alloc::vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Node whose cell contains `y0`.
    pub fn node_of(&self, y0: f64) -> Option<usize> {
        crate::grid::cell_index(&self.y_edges, y0)
    }

    pub fn path(&self, x0: f64, horizon: f64, stream: RngStream, record_dt: Option<f64>) -> Result<PathSample, EngineError> {
        let (mut p, s) = run_path(self, x0, horizon, stream, record_dt)?;
        p.killing_clock_final = s.clock;
        p.killing_threshold = s.threshold;
        Ok(p)
    }
}

#[derive(Clone)]
pub struct ChainState {
    pub node: usize,
    pub t: f64,
    pub clock: f64,
    pub threshold: f64,
    stream: RngStream,
    rng: ChaCha8Rng,
    kill_draws: u64,
}

impl ChainState {
    fn new_threshold(&mut self) {
        self.threshold = self.stream.exp1_at(Purpose::Killing, self.kill_draws);
        self.kill_draws += 1;
        self.clock = 0.0;
    }
}

impl Dynamics for BirthDeath {
    type State = ChainState;

    fn start(&self, y0: f64, stream: RngStream) -> Result<ChainState, EngineError> {
        let node = self.node_of(y0).ok_or(EngineError::OutsideGrid { x0: y0 })?;
        let mut s = ChainState { node, t: 0.0, clock: 0.0, threshold: 0.0, rng: stream.rng(Purpose::Brownian), stream, kill_draws: 0 };
        s.new_threshold();
        Ok(s)
    }

    fn advance(&self, s: &mut ChainState, t_to: f64) -> Result<Status, EngineError> {
        loop {
            let i = s.node;
            let (d, u, l) = (self.down[i], self.up[i], self.leak[i]);
            let q = d + u + l;
            let hold = if q > 0.0 { -libm::log(1.0 - s.rng.random::<f64>()) / q } else { f64::INFINITY };
            let kappa = self.kill[i];
            let span = hold.min(t_to - s.t);
            let dc = kappa * span;
            if dc > 0.0 && s.clock + dc >= s.threshold {
                let tk = s.t + (s.threshold - s.clock) / kappa;
                s.clock = s.threshold;
                s.t = tk;
                return Ok(Status::Absorbed { kind: OutcomeKind::Killed, time: tk });
            }
            s.clock += dc;
            if s.t + hold >= t_to {
                s.t = t_to;
                return Ok(Status::Alive);
            }
            s.t += hold;
            let v = s.rng.random::<f64>() * q;
            if v < d {
                s.node = i - 1;
            } else if v < d + u {
                s.node = i + 1;
            } else {
                return Ok(Status::Absorbed { kind: OutcomeKind::Continuous, time: s.t });
            }
        }
    }

    fn position(&self, s: &ChainState) -> f64 {
        self.y[s.node]
    }

    fn time(&self, s: &ChainState) -> f64 {
        s.t
    }

    fn respawn(&self, s: &mut ChainState, from: &ChainState) {
        s.node = from.node;
        s.t = from.t;
        s.new_threshold();
    }
}

/// One chain path of `spec` on `grid` (rebuilds the chain; use
/// [`BirthDeath::path`] for many paths).
pub fn simulate_chain_path(spec: &DiffusionSpec, x0: f64, horizon: f64, grid: &Grid, stream: RngStream) -> Result<PathSample, EngineError> {
    BirthDeath::from_spec(spec, grid)?.path(x0, horizon, stream, None)
}
