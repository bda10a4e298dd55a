//! Feller classification of the two boundaries from the natural-scale
//! measures.

use alloc::string::String;
use serde::Serialize;

use super::{natural_scale_form, DiffusionSpec, Integrand, MeasureError, ShellResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryVerdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralDiagnostic {
    pub name: String,
    pub result: ShellResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub entrance_at_infinity: BoundaryVerdict,
    pub zero_regular_or_exit: BoundaryVerdict,
    pub integral_values: [IntegralDiagnostic; 2],
}

fn verdict(r: &ShellResult) -> BoundaryVerdict {
    match r {
        ShellResult::Finite { .. } => BoundaryVerdict::Holds,
        ShellResult::Divergent { .. } => BoundaryVerdict::Fails,
        ShellResult::Undetermined { .. } => BoundaryVerdict::Inconclusive,
    }
}

/// `∫ y (m+k)(dy)` over `(a, b)`, natural coordinate; errors become
/// `Undetermined`.
fn moment(spec: &DiffusionSpec, a: f64, b: f64) -> ShellResult {
    let f = Integrand::identity();
    let m = spec.speed.integrate(&f, a, b);
    let k = spec.killing.integrate(&f, a, b);
    match (m, k) {
        (Ok(m), Ok(k)) => m.add(k),
        _ => ShellResult::Undetermined { partial: f64::NAN, shells: 0 },
    }
}

/// Evaluate `∫₁^∞ y(dm+dk)` (entrance at ∞) and `∫₀¹ y(dm+dk)` (0 regular
/// or exit) on the natural-scale measures.
pub fn classify_boundaries(spec: &DiffusionSpec) -> Result<BoundaryReport, MeasureError> {
    let nat = natural_scale_form(spec)?;
    let upper = moment(&nat, 1.0, f64::INFINITY);
    let lower = moment(&nat, 0.0, 1.0);
    Ok(BoundaryReport {
        entrance_at_infinity: verdict(&upper),
        zero_regular_or_exit: verdict(&lower),
        integral_values: [
            IntegralDiagnostic { name: "int_1^inf y (m+k)(dy)".into(), result: upper },
            IntegralDiagnostic { name: "int_0^1 y (m+k)(dy)".into(), result: lower },
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Measure1D;
    use crate::real_fn;

    #[test]
    fn brownian_speed() {
        let spec = DiffusionSpec::natural("bm", Measure1D::lebesgue(2.0), Measure1D::zero());
        let r = classify_boundaries(&spec).unwrap();
        assert_eq!(r.entrance_at_infinity, BoundaryVerdict::Fails);
        assert_eq!(r.zero_regular_or_exit, BoundaryVerdict::Holds);
        assert!((r.integral_values[1].result.value().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_tail_is_entrance() {
        let m = Measure1D::from_density(real_fn(|y: f64| if y < 1.0 { 1.0 } else { y.powi(-3) }));
        let spec = DiffusionSpec::natural("cubic", m, Measure1D::zero());
        let r = classify_boundaries(&spec).unwrap();
        assert_eq!(r.entrance_at_infinity, BoundaryVerdict::Holds);
        assert!((r.integral_values[0].result.value().unwrap() - 1.0).abs() < 1e-8);
    }
}
