//! Process descriptions: the triple `(s, m, k)` with optional SDE data.

use alloc::string::String;
use core::fmt;

use super::{pushforward, scale_from_drift, Measure1D, MeasureError, ScaleFunction};
use crate::math::{exp, ln};
use crate::{real_fn, RealFn};

/// `dY = σ(Y) dB + b(Y) dt`, killed at rate `κ(Y)`.
#[derive(Clone)]
pub struct SdeForm {
    pub sigma: RealFn,
    pub drift: RealFn,
    pub kill_rate: RealFn,
}

/// A killed diffusion on `[0, ∞)` absorbed at 0.
///
/// Speed measures follow the convention `m(dy) = dy / (s′(y) σ²(y))`, so the
/// generator in natural scale is `½ d/dm d/dx − dk/dm`.
#[derive(Clone)]
pub struct DiffusionSpec {
    pub label: String,
    pub scale: ScaleFunction,
    pub speed: Measure1D,
    pub killing: Measure1D,
    pub sde: Option<SdeForm>,
    /// For a natural-scale image: the scale that produced it.
    pub origin: Option<ScaleFunction>,
}

impl fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("label", &self.label)
            .field("scale", &self.scale)
            .field("speed", &self.speed)
            .field("killing", &self.killing)
            .field("sde", &self.sde.is_some())
            .finish()
    }
}

impl DiffusionSpec {
    /// Natural-scale spec from `(m, k)`.
    pub fn natural(label: &str, speed: Measure1D, killing: Measure1D) -> Self {
        Self { label: label.into(), scale: ScaleFunction::identity(), speed, killing, sde: None, origin: None }
    }

    /// Spec from explicit `(s, m, k)` in original coordinates.
    pub fn explicit(label: &str, scale: ScaleFunction, speed: Measure1D, killing: Measure1D) -> Self {
        Self { label: label.into(), scale, speed, killing, sde: None, origin: None }
    }

    /// Spec of `dY = σ dB + b dt` with killing rate `κ`.
    ///
    /// `s` is generated by `b/σ²`; `m_Y = dy/(s′σ²)`, `k_Y = κ m_Y`.
    pub fn from_sde(label: &str, sigma: RealFn, drift: RealFn, kill_rate: RealFn) -> Result<Self, MeasureError> {
        let (sg, dr) = (sigma.clone(), drift.clone());
        let g = real_fn(move |y| {
            let s = sg(y);
            dr(y) / (s * s)
        });
        let scale = scale_from_drift(g)?;
        let sg = sigma.clone();
        let speed_w = real_fn(move |y| {
            let s = sg(y);
            1.0 / (s * s)
        });
        let (sg, kr) = (sigma.clone(), kill_rate.clone());
        let kill_w = real_fn(move |y| {
            let k = kr(y);
            if k == 0.0 {
                return 0.0;
            }
            let s = sg(y);
            k / (s * s)
        });
        Ok(Self {
            label: label.into(),
            speed: Measure1D::scale_relative(speed_w, scale.clone()),
            killing: Measure1D::scale_relative(kill_w, scale.clone()),
            scale,
            sde: Some(SdeForm { sigma, drift, kill_rate }),
            origin: None,
        })
    }

    /// Replace the killing measure by one without a rate representation
    /// (typically atomic). The SDE rate is zeroed; path engines refuse specs
    /// whose killing has atoms.
    pub fn with_killing(mut self, killing: Measure1D) -> Self {
        self.killing = killing;
        if let Some(sde) = &mut self.sde {
            sde.kill_rate = real_fn(|_| 0.0);
        }
        self
    }

    pub fn is_natural(&self) -> bool {
        self.scale.is_identity()
    }

    /// Map an original-coordinate point to the natural coordinate.
    pub fn to_natural(&self, y: f64) -> f64 {
        match (&self.origin, self.is_natural()) {
            (_, false) => self.scale.value(y),
            (Some(s), true) => s.value(y),
            (None, true) => y,
        }
    }

    /// Killing rate `dk/dm` at `x` (density ratio).
    pub fn kill_rate_at(&self, x: f64) -> f64 {
        if let Some(sde) = &self.sde {
            return (sde.kill_rate)(x);
        }
        let m = self.speed.density_at(x);
        let k = self.killing.density_at(x);
        if k == 0.0 {
            0.0
        } else {
            k / m
        }
    }

    /// Speed density strictly positive at every tested point of `grid`.
    pub fn check_speed_positive(&self, grid: &[f64]) -> Result<(), MeasureError> {
        let (lo, hi) = self.speed.support();
        for &x in grid {
            if x > lo && x < hi && self.speed.density().is_some() && !(self.speed.density_at(x) > 0.0) {
                return Err(MeasureError::Invalid(alloc::format!("speed density vanishes at {x}")));
            }
        }
        Ok(())
    }

    /// Largest relative deviation between the stored speed density and
    /// `1/(s′σ²)` on `grid` (original coordinates). `None` without SDE data.
    pub fn sde_speed_mismatch(&self, grid: &[f64]) -> Option<f64> {
        let sde = self.sde.as_ref()?;
        if !self.is_natural() {
            let mut worst: f64 = 0.0;
            for &y in grid {
                let s = (sde.sigma)(y);
                let want = exp(-self.scale.ln_derivative(y)) / (s * s);
                let got = self.speed.density_at(y);
                worst = worst.max((got / want - 1.0).abs());
            }
            return Some(worst);
        }
        // Natural scale: σ_X² m_X = 1.
        let mut worst: f64 = 0.0;
        for &x in grid {
            let s = (sde.sigma)(x);
            let got = self.speed.density_at(x) * s * s;
            worst = worst.max((got - 1.0).abs());
        }
        Some(worst)
    }

    /// Truncation level for an entrance boundary at ∞: the first `y` past
    /// the maximum of `1/s′` (`exp(2∫b/σ²)`) where it falls below
    /// `rel · max`. Returned in original coordinates.
    pub fn entrance_truncation(&self, rel: f64) -> Option<f64> {
        let s = match (&self.origin, self.is_natural()) {
            (_, false) => self.scale.clone(),
            (Some(s), true) => s.clone(),
            (None, true) => return None,
        };
        let lim = s.domain_limit().min(1e6);
        let target = ln(rel);
        let mut best = f64::NEG_INFINITY;
        let mut y = 1.0 / 64.0;
        let mut prev = y;
        while y < lim {
            let w = -s.ln_derivative(y);
            if !w.is_finite() {
                return Some(y);
            }
            if w > best {
                best = w;
            } else if w < best + target {
                // Bisect back to the crossing.
                let (mut lo, mut hi) = (prev, y);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if -s.ln_derivative(mid) < best + target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(hi);
            }
            prev = y;
            y += if y < 32.0 { 1.0 / 64.0 } else { y / 512.0 };
        }
        None
    }
}

/// Natural-scale image: identity scale, `m_X = m_Y∘s⁻¹`, `k_X = k_Y∘s⁻¹`,
/// `σ_X = (s′σ)∘s⁻¹`, zero drift, `κ_X = κ∘s⁻¹`. Idempotent.
pub fn natural_scale_form(spec: &DiffusionSpec) -> Result<DiffusionSpec, MeasureError> {
    if spec.is_natural() {
        return Ok(spec.clone());
    }
    let s = spec.scale.clone();
    let speed = pushforward(&spec.speed, &s)?;
    let killing = pushforward(&spec.killing, &s)?;
    let sde = spec.sde.as_ref().map(|f| {
        let (s1, sig) = (s.clone(), f.sigma.clone());
        let sigma = real_fn(move |x| match s1.inverse(x) {
            Ok(y) => exp(s1.ln_derivative(y)) * sig(y),
            Err(_) => f64::NAN,
        });
        let (s2, kr) = (s.clone(), f.kill_rate.clone());
        let kill_rate = real_fn(move |x| match s2.inverse(x) {
            Ok(y) => kr(y),
            Err(_) => f64::NAN,
        });
        SdeForm { sigma, drift: real_fn(|_| 0.0), kill_rate }
    });
    Ok(DiffusionSpec {
        label: spec.label.clone(),
        scale: ScaleFunction::identity(),
        speed,
        killing,
        sde,
        origin: Some(s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Integrand;

    fn logistic() -> DiffusionSpec {
        DiffusionSpec::from_sde(
            "logistic",
            real_fn(libm::sqrt),
            real_fn(|y| y * (1.0 - y)),
            real_fn(|y: f64| y.min(1.0)),
        )
        .unwrap()
    }

    #[test]
    fn logistic_speed_matches_closed_form() {
        let spec = logistic();
        for &y in &[0.01, 0.5, 1.0, 3.0] {
            let want = libm::exp(2.0 * y - y * y) / y;
            assert!((spec.speed.density_at(y) / want - 1.0).abs() < 1e-11, "{y}");
        }
        assert!(spec.sde_speed_mismatch(&[0.1, 1.0, 2.0]).unwrap() < 1e-12);
    }

    #[test]
    fn natural_form_is_idempotent_and_mass_preserving() {
        let spec = logistic();
        let nat = natural_scale_form(&spec).unwrap();
        let again = natural_scale_form(&nat).unwrap();
        assert!(again.is_natural());
        for &(a, b) in &[(0.1, 0.7), (1.0, 2.5)] {
            let m_y = spec.speed.mass(a, b).unwrap();
            let m_x = nat.speed.mass(spec.scale.value(a), spec.scale.value(b)).unwrap();
            let m_xx = again.speed.mass(spec.scale.value(a), spec.scale.value(b)).unwrap();
            assert!((m_x / m_y - 1.0).abs() < 1e-8);
            assert_eq!(m_x, m_xx);
        }
        // σ_X² m_X = 1 in natural scale.
        assert!(nat.sde_speed_mismatch(&[0.05, 0.8, 4.0]).unwrap() < 1e-9);
    }

    #[test]
    fn entrance_truncation_logistic() {
        let y = logistic().entrance_truncation(1e-12).unwrap();
        assert!((y - (1.0 + libm::sqrt(-libm::log(1e-12)))).abs() < 1e-6, "{y}");
    }

    #[test]
    fn moment_through_overflowing_scale() {
        let nat = natural_scale_form(&logistic()).unwrap();
        // ∫ x m_X(dx) = ∫ s(y) m_Y(dy): converges although s overflows.
        let r = nat.speed.integrate(&Integrand::identity(), 0.0, f64::INFINITY).unwrap();
        assert!(r.is_finite(), "{r:?}");
    }
}
