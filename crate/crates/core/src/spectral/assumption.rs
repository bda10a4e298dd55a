//! Minorization and survival-comparison constants of the finite chain.

use alloc::vec::Vec;
use serde::Serialize;

use super::kernel::transition_matrix;
use super::DiscretizedGenerator;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionAt {
    pub t0: f64,
    /// `Σⱼ minᵢ Kᵢⱼ` of the conditional kernel at `t0`.
    pub c1: f64,
    /// `min_t ν·S(t) / maxᵢ Sᵢ(t)` over the horizon grid.
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub per_t0: Vec<AssumptionAt>,
    /// Largest `c1·c2` among the tested `t0`, if any `c1 > 0`.
    pub best: Option<AssumptionAt>,
    pub message: Option<&'static str>,
}

/// Survival is compared at `t = j·t0`, `j = 1..=horizon_steps`.
pub fn verify_assumption_a(gen: &DiscretizedGenerator, t0_grid: &[f64], horizon_steps: usize) -> AssumptionReport {
    let n = gen.n();
    let mut per_t0 = Vec::new();
    for &t0 in t0_grid {
        let p = transition_matrix(gen, t0);
        let surv: Vec<f64> = (0..n).map(|i| p.row(i).iter().sum()).collect();
        let mut nu = alloc::vec![f64::INFINITY; n];
        for i in 0..n {
            for (j, v) in p.row(i).iter().enumerate() {
                nu[j] = nu[j].min((v / surv[i]).max(0.0));
            }
        }
        let c1: f64 = nu.iter().sum();
        let c2 = if c1 > 0.0 {
            nu.iter_mut().for_each(|v| *v /= c1);
            // S(j·t0) = P_{t0}^j 1
            let mut s = surv.clone();
            let mut c2 = f64::INFINITY;
            for j in 1..=horizon_steps {
                if j > 1 {
                    s = p.mul_vec(&s);
                }
                let top = s.iter().cloned().fold(0.0, f64::max);
                if !(top > 0.0) {
                    break;
                }
                let nus: f64 = nu.iter().zip(&s).map(|(a, b)| a * b).sum();
                c2 = c2.min(nus / top);
            }
            c2
        } else {
            0.0
        };
        per_t0.push(AssumptionAt { t0, c1, c2 });
    }
    let best = per_t0
        .iter()
        .filter(|a| a.c1 > 0.0)
        .cloned()
        .fold(None, |best: Option<AssumptionAt>, a| match best {
            Some(b) if b.c1 * b.c2 >= a.c1 * a.c2 => Some(b),
            _ => Some(a),
        });
    let message = if best.is_none() { Some("minorization not detected at this resolution") } else { None };
    AssumptionReport { per_t0, best, message }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TopBoundary;

    #[test]
    fn symmetric_two_state() {
        // P_t = e^{-2t}[[cosh t, sinh t], [sinh t, cosh t]]: rows differ, c1 = 1 − e^{−2t}.
        let g = DiscretizedGenerator::from_parts(alloc::vec![0.5, 1.0], alloc::vec![1.0, 1.0], alloc::vec![0.0, 0.0], TopBoundary::Dirichlet)
            .unwrap();
        let r = verify_assumption_a(&g, &[0.5, 1.0, 2.0], 10);
        for a in &r.per_t0 {
            assert!((a.c1 - (1.0 - libm::exp(-2.0 * a.t0))).abs() < 1e-12);
            assert!((a.c2 - 1.0).abs() < 1e-12);
        }
        assert!(r.best.is_some());
    }
}
