use proptest::prelude::*;
use qsdlab_core::engine::{BirthDeath, RngStream};
use qsdlab_core::qsd::*;
use qsdlab_core::spectral::{principal_eigenpair, qprocess_invariant, DiscretizedGenerator, SpectralSolution, TopBoundary};

fn toy() -> (DiscretizedGenerator, SpectralSolution, BirthDeath) {
    let n = 40;
    let x: Vec<f64> = (1..=n).map(|i| i as f64 * 0.1).collect();
    let kill: Vec<f64> = x.iter().map(|&xi| 0.02 * xi).collect();
    let gen = DiscretizedGenerator::from_parts(x, vec![0.1; n], kill, TopBoundary::Reflecting).unwrap();
    let sol = principal_eigenpair(&gen).unwrap();
    let chain = BirthDeath::from_generator(&gen);
    (gen, sol, chain)
}

fn bins(gen: &DiscretizedGenerator, sol: &SpectralSolution) -> (Histogram, Vec<f64>) {
    let h = Histogram::from_weights(gen.grid.y_edges.clone(), sol.alpha.clone()).unwrap();
    let edges = quantile_edges(&h, 8);
    (h.rebin(&edges).unwrap(), edges)
}

fn cfg(mode: EnsembleMode, n: usize, seed: u64) -> EnsembleConfig {
    EnsembleConfig { n_particles: n, t_end: 6.0, slice: 0.1, mode, seed, snapshot_times: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0] }
}

#[test]
fn fleming_viot_and_renormalize_recover_alpha() {
    let (gen, sol, chain) = toy();
    let (target, edges) = bins(&gen, &sol);
    let fv = evolve_conditioned_ensemble(&chain, &InitialLaw::Dirac { at: 0.5 }, &cfg(EnsembleMode::FlemingViot, 3000, 1)).unwrap();
    let a = estimate_qsd(&fv.positions, &edges).unwrap();
    let floor = tv_noise_floor(&target.probs, 3000);
    assert!(tv_distance(&a, &target).unwrap() < 0.05, "{:?}", a.probs);
    assert!(fv.generation_log > 0);
    let rn = evolve_conditioned_ensemble(&chain, &InitialLaw::Dirac { at: 2.0 }, &cfg(EnsembleMode::Renormalize, 30_000, 2)).unwrap();
    let b = estimate_qsd(&rn.positions, &edges).unwrap();
    assert!(tv_distance(&b, &target).unwrap() < 0.05, "{} {} {:?} {:?}", tv_distance(&b, &target).unwrap(), rn.positions.len(), b.probs, target.probs);
    assert!(tv_distance(&a, &b).unwrap() < 0.05);
    assert!(floor < 0.05);
}

#[test]
fn fleming_viot_survival_decays_at_lambda0() {
    let (_, sol, chain) = toy();
    let fv = evolve_conditioned_ensemble(&chain, &InitialLaw::Dirac { at: 2.0 }, &cfg(EnsembleMode::FlemingViot, 2000, 3)).unwrap();
    let s = |t: f64| fv.survival.iter().find(|(u, _)| (u - t).abs() < 1e-9).unwrap().1;
    let rate = -(s(6.0).ln() - s(3.0).ln()) / 3.0;
    assert!((rate / sol.lambda0 - 1.0).abs() < 0.05, "{rate} vs {}", sol.lambda0);
}

#[test]
fn ensemble_is_deterministic() {
    let (_, _, chain) = toy();
    let c = EnsembleConfig { t_end: 1.0, ..cfg(EnsembleMode::FlemingViot, 200, 9) };
    let a = evolve_conditioned_ensemble(&chain, &InitialLaw::Dirac { at: 1.0 }, &c).unwrap();
    let b = evolve_conditioned_ensemble(&chain, &InitialLaw::Dirac { at: 1.0 }, &c).unwrap();
    assert_eq!(a, b);
}

#[test]
fn renormalize_reports_extinction() {
    let (_, _, chain) = toy();
    let c = EnsembleConfig { n_particles: 3, t_end: 50.0, ..cfg(EnsembleMode::Renormalize, 3, 4) };
    let err = evolve_conditioned_ensemble(&chain, &InitialLaw::Dirac { at: 0.1 }, &c).unwrap_err();
    assert!(matches!(err, QsdError::Extinct { .. }), "{err:?}");
}

#[test]
fn lambda0_estimate_brackets_spectral_value() {
    let (_, sol, chain) = toy();
    let est = estimate_lambda0(&chain, &InitialLaw::Dirac { at: 1.0 }, &Lambda0Config::new(20_000, 8.0, 5)).unwrap();
    assert!((est.lambda0 / sol.lambda0 - 1.0).abs() < 0.05, "{est:?} vs {}", sol.lambda0);
    assert!(est.ci_low <= est.lambda0 && est.lambda0 <= est.ci_high);
    assert!(est.r2 > 0.99);
}

#[test]
fn eta_estimate_matches_right_eigenvector() {
    let (gen, sol, chain) = toy();
    let xs: Vec<f64> = [0.2, 0.5, 1.0, 2.0, 3.0, 4.0].to_vec();
    let cfg = EtaConfig { x_grid: xs.clone(), t_star: 4.0, n_paths: 20_000, seed: 6 };
    let mut est = estimate_eta(&chain, &cfg, sol.lambda0, &[1.0]).unwrap();
    est.normalize_with(&gen.grid.y, Some(&sol.alpha)).unwrap();
    let exact = MonotoneCubic::new(gen.grid.y.clone(), sol.eta.clone());
    let top = sol.eta.iter().cloned().fold(0.0, f64::max);
    for (x, e) in xs.iter().zip(&est.eta) {
        assert!((e - exact.eval(*x)).abs() < 0.1 * top, "x = {x}: {e} vs {}", exact.eval(*x));
    }
}

#[test]
fn qprocess_chain_occupation_matches_beta() {
    let (gen, sol, _) = toy();
    let q = BirthDeath::qprocess(&sol, &gen);
    let beta = qprocess_invariant(&sol);
    let h = Histogram::from_weights(gen.grid.y_edges.clone(), beta).unwrap();
    let edges = quantile_edges(&h, 8);
    let target = h.rebin(&edges).unwrap();
    let mut counts = vec![0.0; edges.len() - 1];
    for p in 0..20 {
        let c = occupation(&q, 1.0, 100.0, 0.01, 1.0, RngStream::new(7, p), &edges).unwrap();
        counts.iter_mut().zip(c).for_each(|(a, b)| *a += b);
    }
    let got = Histogram::from_weights(edges, counts).unwrap();
    assert!(tv_distance(&got, &target).unwrap() < 0.05, "{:?} vs {:?}", got.probs, target.probs);
}

#[test]
fn rate_fit_on_exact_curve_with_noise_floor() {
    let curve: Vec<(f64, f64)> = (0..100).map(|i| (i as f64 * 0.1, (0.9 * (-1.3 * i as f64 * 0.1).exp()).max(0.01))).collect();
    let fit = fit_convergence_rate(&curve, 0.02, 0.5).unwrap();
    assert!((fit.gamma - 1.3).abs() < 1e-9, "{fit:?}");
}

proptest! {
    #[test]
    fn tv_is_a_metric_on_histograms(
        a in prop::collection::vec(0.0f64..1.0, 5),
        b in prop::collection::vec(0.0f64..1.0, 5),
        c in prop::collection::vec(0.0f64..1.0, 5),
    ) {
        prop_assume!(a.iter().sum::<f64>() > 0.0 && b.iter().sum::<f64>() > 0.0 && c.iter().sum::<f64>() > 0.0);
        let edges: Vec<f64> = (0..=5).map(|i| i as f64).collect();
        let (ha, hb, hc) = (
            Histogram::from_weights(edges.clone(), a).unwrap(),
            Histogram::from_weights(edges.clone(), b).unwrap(),
            Histogram::from_weights(edges, c).unwrap(),
        );
        let (ab, ba) = (tv_distance(&ha, &hb).unwrap(), tv_distance(&hb, &ha).unwrap());
        prop_assert!((ab - ba).abs() < 1e-15);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!(ab <= tv_distance(&ha, &hc).unwrap() + tv_distance(&hc, &hb).unwrap() + 1e-12);
        prop_assert!(tv_distance(&ha, &ha).unwrap() == 0.0);
    }

    #[test]
    fn empirical_histogram_is_a_probability(points in prop::collection::vec(0.0f64..20.0, 1..300), k in 2usize..12) {
        let edges = sample_quantile_edges(&points, k);
        let h = estimate_qsd(&points, &edges).unwrap();
        let total: f64 = h.probs.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(h.probs.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn monotone_cubic_preserves_order(ys in prop::collection::vec(0.0f64..1.0, 3..10)) {
        let mut y = ys;
        y.sort_by(|a, b| a.total_cmp(b));
        let x: Vec<f64> = (1..=y.len()).map(|i| i as f64).collect();
        let f = MonotoneCubic::new(x.clone(), y.clone());
        let mut prev = f64::NEG_INFINITY;
        for i in 0..200 {
            let t = 1.0 + (x.len() - 1) as f64 * i as f64 / 199.0;
            let v = f.eval(t);
            prop_assert!(v >= prev - 1e-12);
            prev = v;
        }
    }
}
