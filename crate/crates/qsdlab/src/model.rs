//! Build a [`DiffusionSpec`] from the `[model]` section.

use qsdlab_core::engine::JumpRule;
use qsdlab_core::measures::{Atom, DiffusionSpec, Measure1D, MeasureError};
use qsdlab_core::{real_fn, zoo, RealFn};

use crate::config::{Killing, ModelConfig};

/// Which specialised checkers apply.
#[derive(Clone)]
pub enum Family {
    Logistic { h: RealFn, kappa: RealFn, beta: f64 },
    DriftedBm { h: RealFn, kappa: RealFn },
    Natural,
}

#[derive(Clone)]
pub struct BuiltModel {
    pub spec: DiffusionSpec,
    pub family: Family,
    pub jumps: Option<JumpRule>,
}

impl BuiltModel {
    /// Paths can be simulated with the Euler engine (SDE data and no atoms).
    pub fn has_sde(&self) -> bool {
        self.spec.sde.is_some() && !self.spec.killing.has_atoms()
    }
}

fn atoms(count: usize) -> Result<Measure1D, MeasureError> {
    let atoms = (1..=count)
        .map(|n| {
            let w = 0.5f64.powi(n as i32);
            Atom { location: w, mass: w }
        })
        .collect();
    Measure1D::atomic(atoms)
}

/// Rate function for non-atomic killing kinds.
fn rate(k: &Killing) -> RealFn {
    match *k {
        Killing::None | Killing::Atoms { .. } => real_fn(|_| 0.0),
        Killing::MinOne { c } => real_fn(move |y| c * y.min(1.0)),
        Killing::Constant { c } => real_fn(move |_| c),
        Killing::Power { c, p } => real_fn(move |y| c * y.powf(p)),
        Killing::Oscillating => real_fn(|y| (1.0 / y).sin().max(y.sqrt())),
        Killing::InvSqrtOrSqrt => real_fn(|y| y.powf(-0.5).max(y.sqrt())),
    }
}

fn with_atoms(spec: DiffusionSpec, k: &Killing) -> Result<DiffusionSpec, MeasureError> {
    match k {
        Killing::Atoms { count } => Ok(spec.with_killing(atoms(*count)?)),
        _ => Ok(spec),
    }
}

pub fn build(cfg: &ModelConfig) -> Result<BuiltModel, MeasureError> {
    match cfg {
        ModelConfig::Logistic { growth, competition, beta, killing } | ModelConfig::JumpExtended { growth, competition, beta, killing, .. } => {
            let (g, c, b) = (*growth, *competition, *beta);
            let h = real_fn(move |y| g - c * y.powf(b));
            let kappa = rate(killing);
            let mut spec = with_atoms(zoo::logistic(h.clone(), kappa.clone())?, killing)?;
            let jumps = match cfg {
                ModelConfig::JumpExtended { jump, .. } => {
                    spec.label = "jump_extended".into();
                    Some(*jump)
                }
                _ => None,
            };
            Ok(BuiltModel { spec, family: Family::Logistic { h, kappa, beta: b }, jumps })
        }
        ModelConfig::DriftedBm { coef, beta, killing } => {
            let (a, b) = (*coef, *beta);
            let h = real_fn(move |y| a * y.powf(b));
            let kappa = rate(killing);
            let spec = with_atoms(zoo::drifted_bm(h.clone(), kappa.clone())?, killing)?;
            Ok(BuiltModel { spec, family: Family::DriftedBm { h, kappa }, jumps: None })
        }
        ModelConfig::NaturalScale { killing } => {
            let m = Measure1D::from_density(real_fn(|x| if x < 1.0 { 1.0 } else { (-(x - 1.0)).exp() }));
            let k = match killing {
                Killing::None => Measure1D::zero(),
                Killing::Atoms { count } => atoms(*count)?,
                other => Measure1D::from_density(rate(other)).with_support(0.0, 1.0)?,
            };
            Ok(BuiltModel { spec: DiffusionSpec::natural("natural_scale", m, k), family: Family::Natural, jumps: None })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_default_matches_zoo() {
        let cfg = ModelConfig::Logistic { growth: 1.0, competition: 1.0, beta: 1.0, killing: Killing::MinOne { c: 1.0 } };
        let b = build(&cfg).unwrap();
        let z = zoo::logistic_feller();
        for y in [0.1, 1.0, 3.0] {
            assert!((b.spec.speed.density_at(y) / z.speed.density_at(y) - 1.0).abs() < 1e-12);
            assert_eq!(b.spec.kill_rate_at(y), z.kill_rate_at(y));
        }
        assert!(b.has_sde());
    }

    #[test]
    fn atomic_killing_has_no_sde_engine() {
        let cfg = ModelConfig::DriftedBm { coef: 1.0, beta: 2.0, killing: Killing::Atoms { count: 5 } };
        let b = build(&cfg).unwrap();
        assert_eq!(b.spec.killing.atoms().len(), 5);
        assert!(!b.has_sde());
    }

    #[test]
    fn natural_killing_restricted_to_unit_interval() {
        let b = build(&ModelConfig::NaturalScale { killing: Killing::Constant { c: 2.0 } }).unwrap();
        assert!(b.spec.is_natural());
        assert!((b.spec.killing.mass(0.0, 5.0).unwrap() - 2.0).abs() < 1e-9);
    }
}
