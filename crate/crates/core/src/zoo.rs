//! Built-in models.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math::{powf, sin, sqrt};
use crate::measures::{Atom, DiffusionSpec, Measure1D, MeasureError};
use crate::{real_fn, RealFn};

/// `dY = √Y dB + Y h(Y) dt`, killed at rate `κ`.
pub fn logistic(h: RealFn, kappa: RealFn) -> Result<DiffusionSpec, MeasureError> {
    let hh = h.clone();
    DiffusionSpec::from_sde("logistic", real_fn(sqrt), real_fn(move |y| y * hh(y)), kappa)
}

/// `dY = dB − h(Y) dt`, killed at rate `κ`.
pub fn drifted_bm(h: RealFn, kappa: RealFn) -> Result<DiffusionSpec, MeasureError> {
    let hh = h.clone();
    DiffusionSpec::from_sde("drifted_bm", real_fn(|_| 1.0), real_fn(move |y| -hh(y)), kappa)
}

/// `h(y) = 1 − y`, `κ(y) = 1 ∧ y`.
pub fn logistic_feller() -> DiffusionSpec {
    let mut s = logistic(real_fn(|y| 1.0 - y), real_fn(|y| y.min(1.0))).expect("logistic drift is integrable");
    s.label = "logistic_feller".into();
    s
}

/// `h(y) = 1 − y`, `κ(y) = sin(1/y) ∨ √y`.
pub fn logistic_oscillating() -> DiffusionSpec {
    let mut s = logistic(real_fn(|y| 1.0 - y), real_fn(|y| sin(1.0 / y).max(sqrt(y)))).expect("logistic drift is integrable");
    s.label = "logistic_oscillating".into();
    s
}

/// `h(y) = y²`, `κ(y) = y^{−1/2} ∨ √y`.
pub fn drifted_bm_square() -> DiffusionSpec {
    let mut s = drifted_bm(real_fn(|y| y * y), real_fn(|y| powf(y, -0.5).max(sqrt(y)))).expect("polynomial drift is integrable");
    s.label = "drifted_bm_square".into();
    s
}

/// `h(y) = y²` with killing only at the atoms `bₙ δ_{aₙ}`, `aₙ = 2⁻ⁿ`, `bₙ = 2⁻ⁿ`.
pub fn drifted_bm_atomic(n_atoms: usize) -> DiffusionSpec {
    let base = drifted_bm(real_fn(|y| y * y), real_fn(|_| 0.0)).expect("polynomial drift is integrable");
    let atoms = (1..=n_atoms)
        .map(|n| {
            let w = powf(2.0, -(n as f64));
            Atom { location: w, mass: w }
        })
        .collect();
    let k = Measure1D::atomic(atoms).expect("atoms are positive");
    let mut s = base.with_killing(k);
    s.label = "drifted_bm_atomic".into();
    s
}

/// Natural-scale model with `m = dx` on `(0, 1)`, `m = e^{−(x−1)} dx` above,
/// and `k = dx/x` on `(0, 1)`.
pub fn natural_inverse_killing() -> DiffusionSpec {
    let m = Measure1D::from_density(real_fn(|x| if x < 1.0 { 1.0 } else { crate::math::exp(-(x - 1.0)) }));
    let k = Measure1D::from_density(real_fn(|x| 1.0 / x)).with_support(0.0, 1.0).expect("valid interval");
    DiffusionSpec::natural("natural_inverse_killing", m, k)
}

pub fn names() -> Vec<&'static str> {
    alloc::vec![
        "logistic_feller",
        "logistic_oscillating",
        "drifted_bm_square",
        "drifted_bm_atomic",
        "natural_inverse_killing"
    ]
}

pub fn by_name(name: &str) -> Result<DiffusionSpec, MeasureError> {
    Ok(match name {
        "logistic_feller" => logistic_feller(),
        "logistic_oscillating" => logistic_oscillating(),
        "drifted_bm_square" => drifted_bm_square(),
        "drifted_bm_atomic" => drifted_bm_atomic(12),
        "natural_inverse_killing" => natural_inverse_killing(),
        other => return Err(MeasureError::Invalid(String::from("unknown model: ") + other)),
    })
}
