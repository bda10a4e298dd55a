//! Dense transition matrices of the discretized chain and the h-transform.

use alloc::vec;
use alloc::vec::Vec;

use super::{DiscretizedGenerator, SpectralError, SpectralSolution};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            let orow = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn vec_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

/// `exp(A)` by scaling and squaring with a Taylor core. While it is small,
/// the squarings act on `E = exp(A/2ˢ) − I` (`(I+E)² = I + 2E + E²`), which
/// keeps the increments of stiff generators from drowning in the identity.
pub fn expm(a: &Matrix) -> Matrix {
    expm_with(a, 0.25)
}

/// As [`expm`], but `E` is carried through every squaring. Suited to
/// conservative generators, where row sums matter more than the relative
/// accuracy of tiny diagonal entries.
fn expm_conservative(a: &Matrix) -> Matrix {
    expm_with(a, f64::INFINITY)
}

fn expm_with(a: &Matrix, switch: f64) -> Matrix {
    let n = a.n;
    let norm = a.norm_inf();
    let mut s = 0u32;
    while norm / libm::ldexp(1.0, s as i32) > 0.5 {
        s += 1;
    }
    let scale = libm::ldexp(1.0, -(s as i32));
    let b = Matrix { n, data: a.data.iter().map(|v| v * scale).collect() };
    // E = B (I + B/2 (I + B/3 (…))), degree 16.
    let mut p = Matrix::identity(n);
    for k in (2..=16).rev() {
        let mut q = b.mul(&p);
        q.data.iter_mut().for_each(|v| *v /= k as f64);
        for i in 0..n {
            q.data[i * n + i] += 1.0;
        }
        p = q;
    }
    let mut e = b.mul(&p);
    let mut left = s;
    // Once E is no longer small, tiny entries of I + E need plain squaring.
    while left > 0 && e.norm_inf() < switch {
        let mut sq = e.mul(&e);
        sq.data.iter_mut().zip(&e.data).for_each(|(v, x)| *v += 2.0 * x);
        e = sq;
        left -= 1;
    }
    for i in 0..n {
        e.data[i * n + i] += 1.0;
    }
    for _ in 0..left {
        e = e.mul(&e);
    }
    e
}

/// `P_t = exp(tL)` of the sub-Markov chain.
pub fn transition_matrix(gen: &DiscretizedGenerator, t: f64) -> Matrix {
    let (lo, di, up) = gen.tridiagonal();
    let n = gen.n();
    let mut a = Matrix::zeros(n);
    for i in 0..n {
        a.data[i * n + i] = t * di[i];
        if i > 0 {
            a.data[i * n + i - 1] = t * lo[i];
        }
        if i + 1 < n {
            a.data[i * n + i + 1] = t * up[i];
        }
    }
    expm(&a)
}

/// Row-sum tolerance of the returned kernel.
pub const KERNEL_ROW_TOL: f64 = 1e-10;

/// Largest accepted `t · maxᵢ |(Lη + λ₀η)ᵢ / ηᵢ|`, i.e. the row defect the
/// untilted formula would carry.
pub const EIGEN_DEFECT_TOL: f64 = 1e-6;

/// `p̃ᵢⱼ = e^{λ₀t} (ηⱼ/ηᵢ) (P_t)ᵢⱼ` computed as `exp(t L̃)` with the tilted
/// generator `L̃ = D⁻¹(L + λ₀)D`, `D = diag(η)`. The diagonal of `L̃` is
/// taken conservative; the eigen relation it replaces is checked first.
pub fn qprocess_kernel(sol: &SpectralSolution, gen: &DiscretizedGenerator, t: f64) -> Result<Matrix, SpectralError> {
    let n = gen.n();
    if sol.eta.len() != n {
        return Err(SpectralError::Invalid("solution does not match generator".into()));
    }
    if sol.eta.iter().any(|&e| !(e > 0.0)) {
        return Err(SpectralError::Invalid("h-transform needs η > 0 at every node".into()));
    }
    let eta = &sol.eta;
    let le = gen.apply(eta);
    let defect = (0..n).map(|i| ((le[i] + sol.lambda0 * eta[i]) / eta[i]).abs()).fold(0.0, f64::max) * t;
    if !(defect <= EIGEN_DEFECT_TOL) {
        return Err(SpectralError::KernelInconsistent { deviation: defect });
    }
    let rates = qprocess_rates(sol, gen);
    let mut a = Matrix::zeros(n);
    for (i, &(d, u)) in rates.iter().enumerate() {
        a.data[i * n + i] = -t * (d + u);
        if i > 0 {
            a.data[i * n + i - 1] = t * d;
        }
        if i + 1 < n {
            a.data[i * n + i + 1] = t * u;
        }
    }
    let k = expm_conservative(&a);
    let worst = (0..n).map(|i| (k.row(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    if worst > KERNEL_ROW_TOL {
        return Err(SpectralError::KernelInconsistent { deviation: worst });
    }
    Ok(k)
}

/// Off-diagonal `(down, up)` rates of the Q-process chain,
/// `L̃ᵢⱼ = Lᵢⱼ ηⱼ/ηᵢ`. The tilted chain never reaches the absorbing point.
pub fn qprocess_rates(sol: &SpectralSolution, gen: &DiscretizedGenerator) -> Vec<(f64, f64)> {
    let n = gen.n();
    (0..n)
        .map(|i| {
            let (d, u) = gen.rates(i);
            let down = if i > 0 { d * sol.eta[i - 1] / sol.eta[i] } else { 0.0 };
            let up = if i + 1 < n { u * sol.eta[i + 1] / sol.eta[i] } else { 0.0 };
            (down, up)
        })
        .collect()
}

/// Invariant law `βᵢ = ηᵢαᵢ` of the Q-process.
pub fn qprocess_invariant(sol: &SpectralSolution) -> Vec<f64> {
    let mut b: Vec<f64> = sol.eta.iter().zip(&sol.alpha).map(|(e, a)| e * a).collect();
    let s: f64 = b.iter().sum();
    b.iter_mut().for_each(|v| *v /= s);
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{principal_eigenpair, TopBoundary};

    fn chain(n: usize) -> DiscretizedGenerator {
        let x: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64 * 3.0).collect();
        let m: Vec<f64> = x.iter().map(|v| 3.0 / n as f64 * libm::exp(-v * v / 2.0)).collect();
        let k: Vec<f64> = x.iter().zip(&m).map(|(v, mm)| mm * 0.5 * v).collect();
        DiscretizedGenerator::from_parts(x, m, k, TopBoundary::Reflecting).unwrap()
    }

    #[test]
    fn expm_of_diagonal_and_rotation() {
        let mut a = Matrix::zeros(2);
        a.data = vec![0.0, 1.0, -1.0, 0.0];
        let e = expm(&a);
        assert!((e.get(0, 0) - libm::cos(1.0)).abs() < 1e-14);
        assert!((e.get(0, 1) - libm::sin(1.0)).abs() < 1e-14);
        a.data = vec![-30.0, 0.0, 0.0, 2.0];
        let e = expm(&a);
        assert!((e.get(0, 0) / libm::exp(-30.0) - 1.0).abs() < 1e-12);
        assert!((e.get(1, 1) - libm::exp(2.0)).abs() < 1e-12);
    }

    #[test]
    fn semigroup_and_zero_time() {
        let g = chain(60);
        assert_eq!(transition_matrix(&g, 0.0), Matrix::identity(60));
        let (s, t) = (0.37, 1.21);
        let lhs = transition_matrix(&g, s + t);
        let rhs = transition_matrix(&g, s).mul(&transition_matrix(&g, t));
        assert!(lhs.max_abs_diff(&rhs) < 1e-9);
    }

    #[test]
    fn kernel_is_stochastic_and_fixes_beta() {
        let g = chain(60);
        let sol = principal_eigenpair(&g).unwrap();
        let beta = qprocess_invariant(&sol);
        for t in [0.0, 0.5, 2.0] {
            let k = qprocess_kernel(&sol, &g, t).unwrap();
            let moved = k.vec_mul(&beta);
            let d = moved.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d < 1e-10, "t={t}: {d}");
        }
    }

    #[test]
    fn wrong_eigenvalue_is_rejected() {
        let g = chain(30);
        let mut sol = principal_eigenpair(&g).unwrap();
        sol.lambda0 *= 1.01;
        assert!(matches!(qprocess_kernel(&sol, &g, 1.0), Err(SpectralError::KernelInconsistent { .. })));
    }
}
