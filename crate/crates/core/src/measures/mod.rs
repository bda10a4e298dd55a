//! Speed and killing measures on `(0, ∞)`, scale functions, and the
//! calculus built on them: integration with divergence detection,
//! pushforward through a scale, and boundary classification.

mod boundary;
mod diffusion;
pub mod quadrature;
mod scale;

pub use boundary::{classify_boundaries, BoundaryReport, BoundaryVerdict, IntegralDiagnostic};
pub use diffusion::{natural_scale_form, DiffusionSpec, SdeForm};
pub use quadrature::{QuadConfig, ShellProtocol, ShellResult};
pub use scale::{scale_from_drift, ScaleFunction};

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use quadrature::{adaptive, run_shells, QuadError};
use crate::math::{exp, ln, powf};
use crate::RealFn;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("integrand singular in interior (non-finite value at {at})")]
    SingularIntegrand { at: f64 },
    #[error("invalid atom at {location} with mass {mass}: masses must be positive, locations positive and increasing")]
    InvalidAtom { location: f64, mass: f64 },
    #[error("invalid interval ({a}, {b})")]
    InvalidInterval { a: f64, b: f64 },
    #[error("scale function not invertible at {at}")]
    NotInvertible { at: f64 },
    #[error("drift not locally integrable (near {at})")]
    DriftNotIntegrable { at: f64 },
    #[error("specification has neither a scale function nor an SDE form")]
    MissingScale,
    #[error("specification is not in natural scale; apply natural_scale_form first")]
    NotNaturalScale,
    #[error("measure of a compact interval is not finite: ({a}, {b})")]
    NotLocallyFinite { a: f64, b: f64 },
    #[error("{0}")]
    Invalid(String),
}

impl From<QuadError> for MeasureError {
    fn from(e: QuadError) -> Self {
        match e {
            QuadError::NonFinite { at } => MeasureError::SingularIntegrand { at },
            QuadError::NotConverged { value, error } => {
                MeasureError::Invalid(alloc::format!("quadrature failed: estimate {value} ± {error}"))
            }
        }
    }
}

/// A point mass.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Absolutely continuous part of a measure.
#[derive(Clone)]
pub enum Density {
    /// Density given directly in the measure's own coordinate.
    Function(RealFn),
    /// `weight(y) / s′(y)`: the form taken by speed and killing densities
    /// derived from an SDE. Kept symbolic so moments in the natural
    /// coordinate `s(y)` can be integrated without overflow.
    ScaleRelative { weight: RealFn, scale: ScaleFunction },
    /// Image of `base` under `scale`.
    Pushforward { base: Arc<Density>, scale: ScaleFunction },
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Function(_) => f.write_str("Function"),
            Density::ScaleRelative { scale, .. } => write!(f, "ScaleRelative({scale:?})"),
            Density::Pushforward { base, scale } => write!(f, "Pushforward({base:?} through {scale:?})"),
        }
    }
}

/// Integrand for [`Measure1D::integrate`]. `Power(p)` is `x ↦ xᵖ` and gets
/// an overflow-free path through scale-relative densities.
#[derive(Clone)]
pub enum Integrand {
    Power(f64),
    Function(RealFn),
}

impl Integrand {
    pub fn one() -> Self {
        Integrand::Power(0.0)
    }
    pub fn identity() -> Self {
        Integrand::Power(1.0)
    }
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Integrand::Power(p) if *p == 0.0 => 1.0,
            Integrand::Power(p) if *p == 1.0 => x,
            Integrand::Power(p) => powf(x, *p),
            Integrand::Function(f) => f(x),
        }
    }
}

/// Locally finite measure on `(0, ∞)`: optional density plus finitely many
/// atoms. `support` bounds where the density may be non-zero.
#[derive(Clone, Debug)]
pub struct Measure1D {
    density: Option<Density>,
    atoms: Vec<Atom>,
    support: (f64, f64),
}

/// Base density plus the chain of scales mapping base coordinates to the
/// measure's coordinates.
struct Resolved<'a> {
    base: &'a Density,
    chain: Vec<&'a ScaleFunction>,
}

impl<'a> Resolved<'a> {
    fn new(d: &'a Density) -> Self {
        let mut chain = Vec::new();
        let mut cur = d;
        while let Density::Pushforward { base, scale } = cur {
            chain.push(scale);
            cur = base;
        }
        chain.reverse();
        Resolved { base: cur, chain }
    }

    fn forward(&self, y: f64) -> f64 {
        self.chain.iter().fold(y, |v, s| s.value(v))
    }

    fn inverse(&self, x: f64) -> Result<f64, MeasureError> {
        let mut v = x;
        for s in self.chain.iter().rev() {
            if v.is_infinite() {
                return Ok(f64::INFINITY);
            }
            v = s.inverse(v)?;
        }
        Ok(v)
    }

    fn domain_limit(&self) -> f64 {
        let mut lim = f64::INFINITY;
        if let Density::ScaleRelative { scale, .. } = self.base {
            lim = lim.min(scale.domain_limit());
        }
        if let Some(s) = self.chain.first() {
            lim = lim.min(s.domain_limit());
        }
        lim
    }

    fn base_density(&self, y: f64) -> f64 {
        match self.base {
            Density::Function(f) => f(y),
            Density::ScaleRelative { weight, scale } => {
                let w = weight(y);
                if w == 0.0 {
                    0.0
                } else {
                    w * exp(-scale.ln_derivative(y))
                }
            }
            Density::Pushforward { .. } => unreachable!(),
        }
    }

    /// `f(forward(y)) · base_density(y)`.
    fn weighted(&self, f: &Integrand, y: f64) -> f64 {
        if let (Density::ScaleRelative { weight, scale }, Integrand::Power(p), [s]) =
            (self.base, f, self.chain.as_slice())
        {
            if scale.same_as(s) {
                let w = weight(y);
                if w == 0.0 {
                    return 0.0;
                }
                let p = *p;
                let ln_part = if p == 0.0 {
                    -scale.ln_derivative(y)
                } else if p == 1.0 {
                    scale.ln_ratio(y)
                } else {
                    (p - 1.0) * scale.ln_value(y) + scale.ln_ratio(y)
                };
                return w * exp(ln_part);
            }
        }
        let d = self.base_density(y);
        if d == 0.0 {
            return 0.0;
        }
        f.eval(self.forward(y)) * d
    }

    /// Density of the image measure at `x`.
    fn density_at(&self, x: f64) -> f64 {
        if self.chain.is_empty() {
            return self.base_density(x);
        }
        let y = match self.inverse(x) {
            Ok(y) => y,
            Err(_) => return f64::NAN,
        };
        let d = self.base_density(y);
        if d == 0.0 {
            return 0.0;
        }
        // Jacobian of the chain at y.
        let mut ln_jac = 0.0;
        let mut v = y;
        for s in &self.chain {
            ln_jac += s.ln_derivative(v);
            v = s.value(v);
        }
        d * exp(-ln_jac)
    }
}

impl Measure1D {
    pub fn zero() -> Self {
        Self { density: None, atoms: Vec::new(), support: (0.0, f64::INFINITY) }
    }

    pub fn from_density(f: RealFn) -> Self {
        Self { density: Some(Density::Function(f)), atoms: Vec::new(), support: (0.0, f64::INFINITY) }
    }

    /// `c · Lebesgue`.
    pub fn lebesgue(c: f64) -> Self {
        Self::from_density(crate::real_fn(move |_| c))
    }

    pub fn scale_relative(weight: RealFn, scale: ScaleFunction) -> Self {
        Self {
            density: Some(Density::ScaleRelative { weight, scale }),
            atoms: Vec::new(),
            support: (0.0, f64::INFINITY),
        }
    }

    /// Pure atomic measure.
    pub fn atomic(atoms: Vec<Atom>) -> Result<Self, MeasureError> {
        Self::zero().with_atoms(atoms)
    }

    /// Add atoms (any order; coincident locations are merged).
    pub fn with_atoms(mut self, atoms: Vec<Atom>) -> Result<Self, MeasureError> {
        if atoms.iter().any(|a| !a.location.is_finite() || a.location.is_nan()) {
            return Err(MeasureError::InvalidAtom { location: f64::NAN, mass: f64::NAN });
        }
        self.atoms = merge_atoms(&self.atoms, &atoms)?;
        Ok(self)
    }

    /// Restrict the density to `(a, b)` (atoms are kept as given).
    pub fn with_support(mut self, a: f64, b: f64) -> Result<Self, MeasureError> {
        if !(a >= 0.0 && b > a) {
            return Err(MeasureError::InvalidInterval { a, b });
        }
        self.support = (a, b);
        Ok(self)
    }

    pub fn density(&self) -> Option<&Density> {
        self.density.as_ref()
    }
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
    pub fn support(&self) -> (f64, f64) {
        self.support
    }
    pub fn has_atoms(&self) -> bool {
        !self.atoms.is_empty()
    }
    pub fn is_zero(&self) -> bool {
        self.density.is_none() && self.atoms.is_empty()
    }

    /// Density at `x` (0 outside the support or without a density part).
    pub fn density_at(&self, x: f64) -> f64 {
        match &self.density {
            Some(d) if x > self.support.0 && x < self.support.1 => Resolved::new(d).density_at(x),
            _ => 0.0,
        }
    }

    /// Sum `f(aᵢ)·wᵢ` over atoms strictly inside `(a, b)`.
    fn atom_sum(&self, f: &Integrand, a: f64, b: f64) -> Result<f64, MeasureError> {
        let mut s = 0.0;
        for at in &self.atoms {
            if at.location > a && at.location < b {
                let v = f.eval(at.location);
                if !v.is_finite() {
                    return Err(MeasureError::SingularIntegrand { at: at.location });
                }
                s += v * at.mass;
            }
        }
        Ok(s)
    }

    /// `∫_(a,b) f dμ`, with `a ≥ 0` and `b ≤ ∞`.
    ///
    /// Improper ends (`a = 0`, `b = ∞`) go through the dyadic-shell protocol
    /// in the base coordinate of the density. Atoms on the endpoints are
    /// excluded.
    pub fn integrate(&self, f: &Integrand, a: f64, b: f64) -> Result<ShellResult, MeasureError> {
        self.integrate_with(f, a, b, &IntegrationOptions::default())
    }

    pub fn integrate_with(
        &self,
        f: &Integrand,
        a: f64,
        b: f64,
        opts: &IntegrationOptions,
    ) -> Result<ShellResult, MeasureError> {
        if !(a >= 0.0) || !(b > a) {
            if a == b {
                return Ok(ShellResult::Finite { value: 0.0, error: 0.0, shells: 0 });
            }
            return Err(MeasureError::InvalidInterval { a, b });
        }
        for at in &self.atoms {
            if at.mass < 0.0 {
                return Err(MeasureError::InvalidAtom { location: at.location, mass: at.mass });
            }
        }
        let atoms = self.atom_sum(f, a, b)?;
        let mut total = ShellResult::Finite { value: atoms, error: 0.0, shells: 0 };
        if let Some(d) = &self.density {
            let lo = a.max(self.support.0);
            let hi = b.min(self.support.1);
            if hi > lo {
                total = total.add(integrate_density(d, f, lo, hi, opts)?);
            }
        }
        Ok(total)
    }

    /// Mass of the compact cell `(a, b)`, `0 < a < b < ∞`; an error if not finite.
    pub fn mass(&self, a: f64, b: f64) -> Result<f64, MeasureError> {
        match self.integrate(&Integrand::one(), a, b)? {
            ShellResult::Finite { value, .. } => Ok(value),
            _ => Err(MeasureError::NotLocallyFinite { a, b }),
        }
    }

    /// Mass of `[a, b)`-style cells used by discretizations: density part on
    /// `(a, b)` plus atoms with `a ≤ loc < b`, so adjacent cells partition
    /// the atoms.
    pub fn cell_mass(&self, a: f64, b: f64) -> Result<f64, MeasureError> {
        let mut m = 0.0;
        if let Some(d) = &self.density {
            let lo = a.max(self.support.0);
            let hi = b.min(self.support.1);
            if hi > lo {
                match integrate_density(d, &Integrand::one(), lo, hi, &IntegrationOptions::default())? {
                    ShellResult::Finite { value, .. } => m += value,
                    _ => return Err(MeasureError::NotLocallyFinite { a, b }),
                }
            }
        }
        for at in &self.atoms {
            if at.location >= a && at.location < b {
                m += at.mass;
            }
        }
        Ok(m)
    }

    /// Multiply the measure by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Measure1D {
        let density = self.density.as_ref().map(|d| scale_density(d, c));
        let atoms = self.atoms.iter().map(|a| Atom { location: a.location, mass: a.mass * c }).collect();
        Measure1D { density, atoms, support: self.support }
    }

    /// Sum of two measures (atoms merged; densities added pointwise).
    pub fn plus(&self, other: &Measure1D) -> Result<Measure1D, MeasureError> {
        let atoms = merge_atoms(&self.atoms, &other.atoms)?;
        let (density, support) = match (&self.density, &other.density) {
            (None, None) => (None, (0.0, f64::INFINITY)),
            (Some(d), None) => (Some(d.clone()), self.support),
            (None, Some(d)) => (Some(d.clone()), other.support),
            (Some(_), Some(_)) => {
                let (a, b) = (self.clone(), other.clone());
                let f = crate::real_fn(move |x| a.density_at(x) + b.density_at(x));
                let sup = (self.support.0.min(other.support.0), self.support.1.max(other.support.1));
                (Some(Density::Function(f)), sup)
            }
        };
        Ok(Measure1D { density, atoms, support })
    }
}

fn scale_density(d: &Density, c: f64) -> Density {
    match d {
        Density::Function(f) => {
            let f = f.clone();
            Density::Function(crate::real_fn(move |x| c * f(x)))
        }
        Density::ScaleRelative { weight, scale } => {
            let w = weight.clone();
            Density::ScaleRelative { weight: crate::real_fn(move |y| c * w(y)), scale: scale.clone() }
        }
        Density::Pushforward { base, scale } => {
            Density::Pushforward { base: Arc::new(scale_density(base, c)), scale: scale.clone() }
        }
    }
}

fn merge_atoms(a: &[Atom], b: &[Atom]) -> Result<Vec<Atom>, MeasureError> {
    let mut all: Vec<Atom> = a.iter().chain(b.iter()).copied().collect();
    all.sort_by(|x, y| x.location.partial_cmp(&y.location).unwrap());
    let mut out: Vec<Atom> = Vec::new();
    for at in all {
        match out.last_mut() {
            Some(last) if last.location == at.location => last.mass += at.mass,
            _ => out.push(at),
        }
    }
    validate_atoms(&out)?;
    Ok(out)
}

fn validate_atoms(atoms: &[Atom]) -> Result<(), MeasureError> {
    let mut prev = 0.0;
    for at in atoms {
        if !(at.mass > 0.0) || !(at.location > prev) || !at.location.is_finite() || !at.mass.is_finite() {
            return Err(MeasureError::InvalidAtom { location: at.location, mass: at.mass });
        }
        prev = at.location;
    }
    Ok(())
}

/// Knobs for improper-integral evaluation.
#[derive(Debug, Clone, Copy)]
pub struct IntegrationOptions {
    pub quad: QuadConfig,
    pub shells: ShellProtocol,
    /// Split point (in base coordinates) between the two improper ends.
    pub pivot: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self { quad: QuadConfig::default(), shells: ShellProtocol::default(), pivot: 1.0 }
    }
}

fn integrate_density(
    d: &Density,
    f: &Integrand,
    a: f64,
    b: f64,
    opts: &IntegrationOptions,
) -> Result<ShellResult, MeasureError> {
    let r = Resolved::new(d);
    let ya = r.inverse(a)?;
    let yb = if b.is_infinite() { f64::INFINITY } else { r.inverse(b)? };
    let limit = r.domain_limit();
    let g = |y: f64| r.weighted(f, y);
    let finite = |lo: f64, hi: f64| -> Result<ShellResult, MeasureError> {
        match adaptive(&g, lo, hi, &opts.quad) {
            Ok((v, e)) => Ok(ShellResult::Finite { value: v, error: e, shells: 0 }),
            Err(QuadError::NotConverged { value, .. }) => Ok(ShellResult::Undetermined { partial: value, shells: 0 }),
            Err(e) => Err(e.into()),
        }
    };
    let left = |c: f64| -> Result<ShellResult, MeasureError> {
        let shell = |n: usize| -> Result<Option<(f64, f64)>, QuadError> {
            let hi = c * exp(-(n as f64) * core::f64::consts::LN_2);
            let lo = 0.5 * hi;
            if lo < 1e-300 {
                return Ok(None);
            }
            adaptive(&g, lo, hi, &opts.quad).map(Some)
        };
        Ok(run_shells(shell, &opts.shells)?)
    };
    let right = |c: f64| -> Result<ShellResult, MeasureError> {
        let shell = |n: usize| -> Result<Option<(f64, f64)>, QuadError> {
            let lo = c * exp((n as f64) * core::f64::consts::LN_2);
            let hi = 2.0 * lo;
            if hi > limit || !hi.is_finite() {
                return Ok(None);
            }
            adaptive(&g, lo, hi, &opts.quad).map(Some)
        };
        Ok(run_shells(shell, &opts.shells)?)
    };
    match (ya == 0.0, yb.is_infinite()) {
        (false, false) => finite(ya, yb),
        (true, false) => left(yb),
        (false, true) => right(ya),
        (true, true) => {
            let c = opts.pivot;
            Ok(left(c)?.add(right(c)?))
        }
    }
}

/// `integrate(μ, f, (a,b))`.
pub fn integrate(mu: &Measure1D, f: &Integrand, a: f64, b: f64) -> Result<ShellResult, MeasureError> {
    mu.integrate(f, a, b)
}

/// Image measure `μ∘s⁻¹`.
pub fn pushforward(mu: &Measure1D, s: &ScaleFunction) -> Result<Measure1D, MeasureError> {
    if s.is_identity() {
        return Ok(mu.clone());
    }
    let mut atoms = Vec::with_capacity(mu.atoms.len());
    for at in &mu.atoms {
        let x = s.value(at.location);
        if !x.is_finite() || !(x > 0.0) {
            return Err(MeasureError::NotInvertible { at: at.location });
        }
        atoms.push(Atom { location: x, mass: at.mass });
    }
    validate_atoms(&atoms).map_err(|_| MeasureError::NotInvertible { at: 0.0 })?;
    let (lo, hi) = mu.support;
    let support = (s.value(lo), if hi.is_infinite() { f64::INFINITY } else { s.value(hi) });
    let density = mu.density.as_ref().map(|d| Density::Pushforward { base: Arc::new(d.clone()), scale: s.clone() });
    Ok(Measure1D { density, atoms, support })
}

impl Measure1D {
    /// `ln` of the density at `x`, or `-∞` where it vanishes.
    pub fn ln_density_at(&self, x: f64) -> f64 {
        let d = self.density_at(x);
        if d > 0.0 {
            ln(d)
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real_fn;

    #[test]
    fn lebesgue_density_two() {
        let mu = Measure1D::lebesgue(2.0);
        let v = mu.integrate(&Integrand::identity(), 0.0, 1.0).unwrap().value().unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn atom_evaluation() {
        let mu = Measure1D::atomic(alloc::vec![Atom { location: 1.0, mass: 3.0 }]).unwrap();
        let v = mu.integrate(&Integrand::Power(2.0), 0.0, 2.0).unwrap().value().unwrap();
        assert_eq!(v, 3.0);
        // Endpoint atoms are excluded.
        let w = mu.integrate(&Integrand::one(), 1.0, 2.0).unwrap().value().unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn harmonic_tail_diverges() {
        let mu = Measure1D::from_density(real_fn(|y| 1.0 / y));
        let r = mu.integrate(&Integrand::identity(), 1.0, f64::INFINITY).unwrap();
        assert!(r.is_divergent());
    }

    #[test]
    fn singular_interior_integrand_is_an_error() {
        let mu = Measure1D::lebesgue(1.0);
        let f = Integrand::Function(real_fn(|y| if y > 0.4 && y < 0.6 { f64::NAN } else { y }));
        let r = mu.integrate(&f, 0.1, 0.9);
        assert!(matches!(r, Err(MeasureError::SingularIntegrand { .. })));
    }

    #[test]
    fn invalid_atoms_rejected() {
        assert!(Measure1D::atomic(alloc::vec![Atom { location: 1.0, mass: -1.0 }]).is_err());
        assert!(Measure1D::atomic(alloc::vec![Atom { location: 0.0, mass: 1.0 }]).is_err());
        assert!(Measure1D::atomic(alloc::vec![Atom { location: f64::INFINITY, mass: 1.0 }]).is_err());
        // Order does not matter; coincident atoms merge.
        let mu = Measure1D::atomic(alloc::vec![
            Atom { location: 2.0, mass: 1.0 },
            Atom { location: 1.0, mass: 1.0 },
            Atom { location: 2.0, mass: 0.5 },
        ])
        .unwrap();
        assert_eq!(mu.atoms(), &[Atom { location: 1.0, mass: 1.0 }, Atom { location: 2.0, mass: 1.5 }]);
    }

    #[test]
    fn pushforward_examples() {
        let sq = ScaleFunction::explicit("y^2", real_fn(|y| y * y), Some(real_fn(|y| 2.0 * y)), Some(real_fn(libm::sqrt)));
        let mu = Measure1D::atomic(alloc::vec![Atom { location: 2.0, mass: 5.0 }]).unwrap();
        let p = pushforward(&mu, &sq).unwrap();
        assert_eq!(p.atoms(), &[Atom { location: 4.0, mass: 5.0 }]);

        let lin = ScaleFunction::explicit("2y", real_fn(|y| 2.0 * y), Some(real_fn(|_| 2.0)), None);
        let leb = Measure1D::lebesgue(1.0).with_support(0.0, 1.0).unwrap();
        let p = pushforward(&leb, &lin).unwrap();
        assert!((p.density_at(1.3) - 0.5).abs() < 1e-12);
        let m = p.integrate(&Integrand::one(), 0.0, 2.0).unwrap().value().unwrap();
        assert!((m - 1.0).abs() < 1e-12);

        let id = ScaleFunction::identity();
        let q = pushforward(&leb, &id).unwrap();
        assert_eq!(q.density_at(0.5), leb.density_at(0.5));
    }
}
