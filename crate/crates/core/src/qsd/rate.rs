//! Log-linear fit of a TV decay curve.

use alloc::vec::Vec;
use serde::Serialize;

use super::QsdError;
use crate::math::{exp, ln};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub gamma: f64,
    pub c: f64,
    pub r2: f64,
    /// Standard error of `γ` from the regression residuals.
    pub gamma_stderr: f64,
    pub n_points: usize,
    pub window: (f64, f64),
}

/// Fit `TV(t) ≈ C e^{−γt}` on the points with `floor < TV < ceiling`.
pub fn fit_convergence_rate(curve: &[(f64, f64)], floor: f64, ceiling: f64) -> Result<RateFit, QsdError> {
    let pts: Vec<(f64, f64)> = curve.iter().cloned().filter(|&(_, v)| v > floor && v < ceiling && v > 0.0).collect();
    if pts.len() < 4 {
        return Err(QsdError::InsufficientWindow { points: pts.len() });
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| ln(p.1)).collect();
    let (slope, icpt, r2) = crate::math::linear_fit(&xs, &ys).ok_or(QsdError::InsufficientWindow { points: pts.len() })?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| { let r = y - icpt - slope * x; r * r }).sum();
    let se = if n > 2.0 { libm::sqrt(sse / (n - 2.0) / sxx) } else { f64::NAN };
    if !(slope < 0.0) {
        return Err(QsdError::NoDecay { slope });
    }
    Ok(RateFit { gamma: -slope, c: exp(icpt), r2, gamma_stderr: se, n_points: pts.len(), window: (xs[0], xs[xs.len() - 1]) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential() {
        let c: Vec<(f64, f64)> = (0..20).map(|k| (k as f64 * 0.5, 0.8 * exp(-0.5 * k as f64 * 0.5))).collect();
        let f = fit_convergence_rate(&c, 0.0, 1.0).unwrap();
        assert!((f.gamma - 0.5).abs() < 1e-12 && (f.c - 0.8).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let c = [(0.0, 0.5), (1.0, 0.2), (2.0, 0.01)];
        assert!(matches!(fit_convergence_rate(&c, 0.05, 1.0), Err(QsdError::InsufficientWindow { points: 2 })));
    }
}
