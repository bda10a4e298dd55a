//! Squared-Bessel functionals: coming down from infinity before killing,
//! and the Feller hitting self-test.
//!
//! `Z` is stepped by `Z′ = ((√Z + √h ξ)⁺)² + (δ − 1)h`, clipped at 0, with
//! `0` absorbing when `δ = 0`. The map is increasing in `Z` and in `δ`, so
//! paths driven by the same noise are ordered in the starting level.

use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{EngineError, Estimate, Purpose, RngStream};
use crate::math::{exp, sqrt};
use crate::measures::{natural_scale_form, DiffusionSpec, Measure1D};
use crate::parallel::map_indexed;

#[inline]
fn besq_step(z: f64, delta: f64, h: f64, xi: f64) -> f64 {
    if z == 0.0 && delta == 0.0 {
        return 0.0;
    }
    let r = (sqrt(z) + sqrt(h) * xi).max(0.0);
    (r * r + (delta - 1.0) * h).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComingDown {
    pub estimate: Estimate,
    /// Level up to which the measures were integrated.
    pub truncation: f64,
    pub steps: usize,
}

fn outer_support(mu: &Measure1D) -> f64 {
    if mu.is_zero() {
        return 0.0;
    }
    let mut hi = if mu.density().is_some() { mu.support().1 } else { 0.0 };
    for a in mu.atoms() {
        hi = hi.max(a.location);
    }
    hi
}

/// Monte Carlo of `E[1{∫Zˣ dm < t} exp(−∫Zˣ dk)]`, where `Zˣ` is a squared
/// Bessel process of dimension 2 up to level `x` and 0 above (`x = ∞`
/// allowed). `m`, `k` are taken in natural scale. Measures with unbounded
/// support need `truncation`.
pub fn coming_down_probability(
    spec: &DiffusionSpec,
    t: f64,
    x: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
    truncation: Option<f64>,
) -> Result<ComingDown, EngineError> {
    if !(t > 0.0) || !(x > 0.0) || !(dt > 0.0) || n_paths == 0 {
        return Err(EngineError::Invalid("need t > 0, x > 0, dt > 0, n_paths ≥ 1".into()));
    }
    let nat = natural_scale_form(spec)?;
    let hi = outer_support(&nat.speed).max(outer_support(&nat.killing));
    let level = match (hi.is_finite(), truncation) {
        (true, Some(l)) => hi.min(l),
        (true, None) => hi,
        (false, Some(l)) => l,
        (false, None) => return Err(EngineError::UnboundedSupport),
    };
    let steps = libm::ceil(level / dt) as usize;
    let mut cells_m = Vec::with_capacity(steps);
    let mut cells_k = Vec::with_capacity(steps);
    for j in 0..steps {
        let (a, b) = (j as f64 * dt, ((j + 1) as f64 * dt).min(level));
        // A final atom sitting exactly at the truncation level still counts.
        let b_inc = if j + 1 == steps { b * (1.0 + 1e-15) + 1e-300 } else { b };
        cells_m.push(nat.speed.cell_mass(a, b_inc)?);
        cells_k.push(nat.killing.cell_mass(a, b_inc)?);
    }
    let samples = map_indexed(n_paths, |p| {
        let mut rng = RngStream::new(seed, p as u64).rng(Purpose::Brownian);
        let (mut z, mut area, mut kill) = (0.0f64, 0.0f64, 0.0f64);
        for j in 0..steps {
            let s0 = j as f64 * dt;
            let delta = 2.0 * ((x - s0) / dt).clamp(0.0, 1.0);
            let xi: f64 = rng.sample(StandardNormal);
            let zn = besq_step(z, delta, dt, xi);
            let zbar = 0.5 * (z + zn);
            area += zbar * cells_m[j];
            kill += zbar * cells_k[j];
            z = zn;
            if area >= t {
                return 0.0;
            }
            if z == 0.0 && delta == 0.0 {
                break;
            }
        }
        exp(-kill)
    });
    Ok(ComingDown { estimate: Estimate::from_samples(&samples), truncation: level, steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FellerScheme {
    /// Square-root step above.
    Bessel,
    /// Full-truncation Euler on `Z` itself.
    Euler,
}

/// Empirical `P(T₀ ≤ t)` for `dZ = √Z dW` from `x`; the exact value is
/// `e^{−2x/t}`. `4Z` is a squared Bessel process of dimension 0.
pub fn feller_hitting_check(x: f64, t: f64, n_paths: usize, dt: f64, seed: u64, scheme: FellerScheme) -> Result<Estimate, EngineError> {
    if !(x >= 0.0) || !(t > 0.0) || !(dt > 0.0) || n_paths == 0 {
        return Err(EngineError::Invalid("need x ≥ 0, t > 0, dt > 0, n_paths ≥ 1".into()));
    }
    let steps = libm::ceil(t / dt) as usize;
    let h = t / steps as f64;
    let samples = map_indexed(n_paths, |p| {
        let mut rng = RngStream::new(seed, p as u64).rng(Purpose::Brownian);
        let mut z = x;
        for _ in 0..steps {
            if z == 0.0 {
                break;
            }
            let xi: f64 = rng.sample(StandardNormal);
            z = match scheme {
                FellerScheme::Bessel => 0.25 * besq_step(4.0 * z, 0.0, h, xi),
                FellerScheme::Euler => (z + sqrt(z * h) * xi).max(0.0),
            };
        }
        if z == 0.0 {
            1.0
        } else {
            0.0
        }
    });
    Ok(Estimate::from_samples(&samples))
}

/// Same probability from the exact Poisson–Gamma law of the squared
/// Bessel process of dimension 0 on a grid of `steps` steps.
pub fn feller_hitting_exact(x: f64, t: f64, n_paths: usize, steps: usize, seed: u64) -> Estimate {
    let steps = steps.max(1);
    let h = t / steps as f64;
    let samples = map_indexed(n_paths, |p| {
        let mut rng = RngStream::new(seed, p as u64).rng(Purpose::Brownian);
        let mut q = 4.0 * x;
        for _ in 0..steps {
            if q == 0.0 {
                break;
            }
            let n: f64 = Poisson::new(q / (2.0 * h)).map(|d| rng.sample(d)).unwrap_or(0.0);
            q = if n == 0.0 { 0.0 } else { Gamma::new(n, 2.0 * h).map(|d| rng.sample(d)).unwrap_or(0.0) };
        }
        if q == 0.0 {
            1.0
        } else {
            0.0
        }
    });
    Estimate::from_samples(&samples)
}
