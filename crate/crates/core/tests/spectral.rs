use qsdlab_core::grid::{Grid, GridSpec};
use qsdlab_core::measures::natural_scale_form;
use qsdlab_core::spectral::*;
use qsdlab_core::zoo;

fn logistic(n: usize) -> DiscretizedGenerator {
    let spec = zoo::logistic_feller();
    let nat = natural_scale_form(&spec).unwrap();
    let ymax = spec.entrance_truncation(1e-12).unwrap();
    let g = Grid::build(&nat, &GridSpec::new(n, ymax)).unwrap();
    discretize_generator(&nat, &g, TopBoundary::Reflecting).unwrap()
}

#[test]
fn logistic_grid_convergence() {
    let a = principal_eigenpair(&logistic(400)).unwrap();
    let b = principal_eigenpair(&logistic(800)).unwrap();
    assert!((a.lambda0 / b.lambda0 - 1.0).abs() < 5e-3, "{} {}", a.lambda0, b.lambda0);
}

#[test]
fn eigen_identities_hold_per_solve() {
    let gen = logistic(400);
    let sol = principal_eigenpair(&gen).unwrap();
    let norm = gen.norm_inf();
    assert!(sol.residual_right <= 1e-8 * norm);
    assert!(sol.residual_left <= 1e-8 * norm);
    assert!((sol.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(sol.alpha.iter().all(|&a| a >= 0.0) && sol.eta.iter().all(|&e| e >= 0.0));
    let ae: f64 = sol.alpha.iter().zip(&sol.eta).map(|(a, e)| a * e).sum();
    assert!((ae - 1.0).abs() < 1e-12);
    // Duality: α·(Lη) = −λ₀.
    let leta = gen.apply(&sol.eta);
    let d: f64 = sol.alpha.iter().zip(&leta).map(|(a, v)| a * v).sum();
    assert!((d + sol.lambda0).abs() < 1e-10 * sol.lambda0.max(1.0) * 1e3, "{d}");
    assert!(sol.sturm_consistent);
    assert!(sol.gap > 0.0);
}

#[test]
fn killing_shift_on_logistic() {
    let gen = logistic(200);
    let base = principal_eigenpair(&gen).unwrap();
    for &c in &[0.1, 0.3, 1.0] {
        let s = principal_eigenpair(&gen.with_extra_killing(c)).unwrap();
        assert!((s.lambda0 - base.lambda0 - c).abs() < 1e-10, "c = {c}");
    }
}

#[test]
fn reflecting_and_dirichlet_bracket_lambda0() {
    let b = lambda0_bracket(&logistic(200)).unwrap();
    assert!(b.reflecting <= b.dirichlet);
    assert!(b.width < 1e-8, "{b:?}");
}

#[test]
fn survival_under_alpha_decays_exactly() {
    let gen = logistic(120);
    let sol = principal_eigenpair(&gen).unwrap();
    for &t in &[0.5, 1.0, 2.0] {
        let p = transition_matrix(&gen, t);
        let s = p.mul_vec(&vec![1.0; gen.n()]);
        let sa: f64 = sol.alpha.iter().zip(&s).map(|(a, v)| a * v).sum();
        assert!((sa.ln() / t + sol.lambda0).abs() < 1e-8, "t = {t}");
    }
}

#[test]
fn qprocess_kernel_rows_and_invariance() {
    let gen = logistic(120);
    let sol = principal_eigenpair(&gen).unwrap();
    let beta = qprocess_invariant(&sol);
    for &t in &[0.5, 1.0, 2.0] {
        let k = qprocess_kernel(&sol, &gen, t).unwrap();
        for i in 0..gen.n() {
            assert!((k.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
        let bk = k.vec_mul(&beta);
        let l1: f64 = bk.iter().zip(&beta).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 < 1e-9, "t = {t}: {l1}");
    }
}

#[test]
fn assumption_witness_on_logistic() {
    let r = verify_assumption_a(&logistic(120), &[0.5, 1.0, 2.0, 4.0], 40);
    let best = r.best.unwrap();
    assert!(best.c1 > 0.0 && best.c2 > 0.0);
    let at1 = r.per_t0.iter().find(|a| a.t0 == 1.0).unwrap();
    assert!(at1.c1 > 0.0);
    // Past the mixing time c1 sits on its plateau.
    let (c2, c4) = (r.per_t0[2].c1, r.per_t0[3].c1);
    assert!(c4 >= 0.9 * c2, "{c2} {c4}");
}
