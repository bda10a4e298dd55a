//! Principal eigenpair of the discretized generator.
//!
//! With `L = M⁻¹A`, `A` symmetric, the problem `Lη = −λη` is the pencil
//! `Dη = λMη`, `D = −A`. Below `λ₀` the shifted matrix `D − σM` is a
//! non-singular M-matrix, so Thomas solves are stable and keep iterates
//! positive. The eigenvalue is taken as the Rayleigh quotient written as
//! a sum of non-negative terms.

use alloc::vec;
use alloc::vec::Vec;
use serde::Serialize;

use super::{DiscretizedGenerator, SpectralError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSolution {
    pub lambda0: f64,
    /// Right eigenvector at the nodes, normalized `α·η = 1`.
    pub eta: Vec<f64>,
    /// Left eigenvector as cell masses, a probability vector.
    pub alpha: Vec<f64>,
    pub lambda1: f64,
    pub gap: f64,
    /// `‖(L + λ₀)η‖∞`.
    pub residual_right: f64,
    /// `‖α(L + λ₀)‖∞`.
    pub residual_left: f64,
    pub norm_l: f64,
    pub iterations: usize,
    /// Sturm counts below `λ₀` and `λ₁` are 0 and 1.
    pub sturm_consistent: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenConfig {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self { max_iter: 2000, tol: 1e-15 }
    }
}

/// Solve `(D − σM) v = r` by the Thomas algorithm.
fn solve_shifted(g: &DiscretizedGenerator, sigma: f64, r: &[f64]) -> Vec<f64> {
    let n = g.n();
    // D_ii = c₋ + c₊ + k,  D_{i,i+1} = −c between i and i+1.
    let diag = |i: usize| g.cond_down[i] + g.cond_up(i) + g.kill_mass[i] - sigma * g.mass[i];
    let off = |i: usize| -g.cond_up(i); // between i and i+1
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut b0 = diag(0);
    c[0] = if n > 1 { off(0) / b0 } else { 0.0 };
    d[0] = r[0] / b0;
    for i in 1..n {
        let a = off(i - 1);
        b0 = diag(i) - a * c[i - 1];
        if i + 1 < n {
            c[i] = off(i) / b0;
        }
        d[i] = (r[i] - a * d[i - 1]) / b0;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Number of pencil eigenvalues below `sigma` (negative LDLᵀ pivots).
pub fn sturm_count(g: &DiscretizedGenerator, sigma: f64) -> usize {
    let n = g.n();
    let mut count = 0;
    let mut piv = 0.0;
    for i in 0..n {
        let dii = g.cond_down[i] + g.cond_up(i) + g.kill_mass[i] - sigma * g.mass[i];
        piv = if i == 0 {
            dii
        } else {
            let off = g.cond_up(i - 1);
            let p = if piv == 0.0 { f64::MIN_POSITIVE } else { piv };
            dii - off * off / p
        };
        if piv < 0.0 {
            count += 1;
        }
    }
    count
}

/// Dirichlet form `vᵀDv` as a sum of non-negative terms.
fn dirichlet_form(g: &DiscretizedGenerator, v: &[f64]) -> f64 {
    let n = g.n();
    let mut s = g.cond_down[0] * v[0] * v[0];
    for i in 1..n {
        let d = v[i] - v[i - 1];
        s += g.cond_down[i] * d * d;
    }
    s += g.cond_top * v[n - 1] * v[n - 1];
    for i in 0..n {
        s += g.kill_mass[i] * v[i] * v[i];
    }
    s
}

fn mass_dot(g: &DiscretizedGenerator, u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).zip(&g.mass).map(|((a, b), m)| a * b * m).sum()
}

fn normalize(g: &DiscretizedGenerator, v: &mut [f64]) {
    let s = libm::sqrt(mass_dot(g, v, v));
    v.iter_mut().for_each(|x| *x /= s);
}

/// Inverse iteration for the bottom of the pencil, optionally
/// M-orthogonal to `deflate`. Returns `(λ, v, iterations)`.
fn inverse_iteration(
    g: &DiscretizedGenerator,
    deflate: Option<&[f64]>,
    cfg: &EigenConfig,
) -> Result<(f64, Vec<f64>, usize), SpectralError> {
    let n = g.n();
    let mut v: Vec<f64> = match deflate {
        None => vec![1.0; n],
        // Start with a sign change so the deflated iterate is not tiny.
        Some(_) => (0..n).map(|i| if 2 * i < n { 1.0 } else { -1.0 }).collect(),
    };
    let project = |v: &mut Vec<f64>| {
        if let Some(e) = deflate {
            let c = mass_dot(g, v, e) / mass_dot(g, e, e);
            v.iter_mut().zip(e).for_each(|(a, b)| *a -= c * b);
        }
    };
    project(&mut v);
    normalize(g, &mut v);
    let mut lambda = dirichlet_form(g, &v);
    let mut sigma = 0.0;
    let mut settled = false;
    for it in 0..cfg.max_iter {
        let rhs: Vec<f64> = v.iter().zip(&g.mass).map(|(a, m)| a * m).collect();
        let mut w = solve_shifted(g, sigma, &rhs);
        project(&mut w);
        if w.iter().any(|x| !x.is_finite()) {
            return Err(SpectralError::NotConverged { residual: f64::NAN, iterations: it });
        }
        normalize(g, &mut w);
        // Fix the sign (largest component positive).
        let imax = w.iter().enumerate().fold(0, |k, (i, x)| if x.abs() > w[k].abs() { i } else { k });
        if w[imax] < 0.0 {
            w.iter_mut().for_each(|x| *x = -*x);
        }
        let new = dirichlet_form(g, &w);
        let change = (new - lambda).abs() / new.abs().max(f64::MIN_POSITIVE);
        v = w;
        lambda = new;
        if deflate.is_none() && !settled && change < 1e-3 {
            // Shifting closer to λ₀ keeps D − σM an M-matrix.
            settled = true;
            sigma = 0.9 * lambda;
            continue;
        }
        if change < cfg.tol && (settled || deflate.is_some()) {
            return Ok((lambda, v, it + 1));
        }
    }
    let r = residual_right(g, lambda, &v);
    Err(SpectralError::NotConverged { residual: r, iterations: cfg.max_iter })
}

fn residual_right(g: &DiscretizedGenerator, lambda: f64, eta: &[f64]) -> f64 {
    let le = g.apply(eta);
    le.iter().zip(eta).map(|(a, b)| (a + lambda * b).abs()).fold(0.0, f64::max)
}

fn residual_left(g: &DiscretizedGenerator, lambda: f64, alpha: &[f64]) -> f64 {
    let al = g.apply_left(alpha);
    al.iter().zip(alpha).map(|(a, b)| (a + lambda * b).abs()).fold(0.0, f64::max)
}

/// `λ₀ > 0`, `η`, `α` and the gap `λ₁ − λ₀`.
pub fn principal_eigenpair(g: &DiscretizedGenerator) -> Result<SpectralSolution, SpectralError> {
    principal_eigenpair_with(g, &EigenConfig::default())
}

pub fn principal_eigenpair_with(g: &DiscretizedGenerator, cfg: &EigenConfig) -> Result<SpectralSolution, SpectralError> {
    let n = g.n();
    let (lambda0, mut eta, it0) = inverse_iteration(g, None, cfg)?;
    let vmax = eta.iter().cloned().fold(0.0, f64::max);
    if let Some(&worst) = eta.iter().find(|&&v| v < -1e-12 * vmax) {
        return Err(SpectralError::PerronViolated { component: worst / vmax });
    }
    eta.iter_mut().for_each(|v| *v = v.max(0.0));
    let (lambda1, it1) = if n > 1 {
        let (l1, _, it) = inverse_iteration(g, Some(&eta), cfg)?;
        (l1, it)
    } else {
        (f64::INFINITY, 0)
    };
    let mut alpha: Vec<f64> = eta.iter().zip(&g.mass).map(|(e, m)| e * m).collect();
    let total: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= total);
    let dot: f64 = alpha.iter().zip(&eta).map(|(a, e)| a * e).sum();
    eta.iter_mut().for_each(|e| *e /= dot);
    let sturm_consistent =
        sturm_count(g, lambda0 * (1.0 - 1e-9)) == 0 && (n < 2 || sturm_count(g, lambda1 * (1.0 - 1e-9)) == 1);
    Ok(SpectralSolution {
        lambda0,
        residual_right: residual_right(g, lambda0, &eta),
        residual_left: residual_left(g, lambda0, &alpha),
        norm_l: g.norm_inf(),
        eta,
        alpha,
        lambda1,
        gap: lambda1 - lambda0,
        iterations: it0 + it1,
        sturm_consistent,
    })
}

/// Reflecting vs Dirichlet top: the two `λ₀` that bracket the truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bracket {
    pub reflecting: f64,
    pub dirichlet: f64,
    pub width: f64,
}

pub fn lambda0_bracket(g: &DiscretizedGenerator) -> Result<Bracket, SpectralError> {
    use super::TopBoundary;
    let r = principal_eigenpair(&g.with_top(TopBoundary::Reflecting)?)?.lambda0;
    let d = principal_eigenpair(&g.with_top(TopBoundary::Dirichlet)?)?.lambda0;
    Ok(Bracket { reflecting: r, dirichlet: d, width: (d - r).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TopBoundary;

    /// Chain with `L = [[-2, 1], [1, -2]]`: unit masses, unit conductances
    /// between the nodes and to both absorbing ends.
    fn two_state() -> DiscretizedGenerator {
        // Nodes at 0.5 and 1.0 give conductances 1/(2·0.5) = 1.
        DiscretizedGenerator::from_parts(vec![0.5, 1.0], vec![1.0, 1.0], vec![0.0, 0.0], TopBoundary::Dirichlet).unwrap()
    }

    #[test]
    fn two_state_by_hand() {
        let g = two_state();
        assert_eq!(g.dense(), vec![-2.0, 1.0, 1.0, -2.0]);
        let s = principal_eigenpair(&g).unwrap();
        assert!((s.lambda0 - 1.0).abs() < 1e-13);
        assert!((s.lambda1 - 3.0).abs() < 1e-12);
        assert!((s.alpha[0] - 0.5).abs() < 1e-13);
        assert!((s.eta[0] - 1.0).abs() < 1e-13 && (s.eta[1] - 1.0).abs() < 1e-13);
        assert!(s.sturm_consistent);
    }

    #[test]
    fn killing_shift_is_exact() {
        let x: Vec<f64> = (1..=50).map(|i| (i as f64) * 0.1).collect();
        let m: Vec<f64> = x.iter().map(|v| 0.1 * libm::exp(-v)).collect();
        let k: Vec<f64> = x.iter().zip(&m).map(|(v, mm)| mm * v.min(1.0)).collect();
        let g = DiscretizedGenerator::from_parts(x, m, k, TopBoundary::Reflecting).unwrap();
        let s = principal_eigenpair(&g).unwrap();
        for c in [0.1, 0.3, 1.0] {
            let t = principal_eigenpair(&g.with_extra_killing(c)).unwrap();
            assert!((t.lambda0 - s.lambda0 - c).abs() < 1e-10, "{c}");
            let d = t.eta.iter().zip(&s.eta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d < 1e-8);
        }
    }
}
