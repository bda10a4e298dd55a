use qsdlab_core::engine::*;
use qsdlab_core::measures::{Atom, DiffusionSpec, Measure1D};
use qsdlab_core::spectral::{transition_matrix, DiscretizedGenerator, TopBoundary};
use qsdlab_core::{real_fn, zoo};

fn drifted(h: f64, kappa: f64) -> DiffusionSpec {
    zoo::drifted_bm(real_fn(move |_| h), real_fn(move |_| kappa)).unwrap()
}

#[test]
fn zero_killing_only_continuous_absorption() {
    let model = SdeModel::new(&drifted(1.0, 0.0), SdeOptions::new(1e-3)).unwrap();
    let mut hit = 0;
    for i in 0..400 {
        let p = model.path(0.5, 3.0, RngStream::new(11, i)).unwrap();
        assert_ne!(p.outcome.kind, OutcomeKind::Killed);
        if p.outcome.kind == OutcomeKind::Continuous {
            hit += 1;
            assert!(p.outcome.time <= 3.0);
        }
    }
    assert!(hit > 200, "{hit}");
}

#[test]
fn constant_killing_is_exponential() {
    // Strong upward drift: continuous absorption from 10 is negligible.
    let c = 0.5;
    let model = SdeModel::new(&drifted(-1.0, c), SdeOptions::new(1e-2)).unwrap();
    let n = 4000;
    let alive: Vec<f64> = (0..n)
        .map(|i| {
            let p = model.path(10.0, 2.0, RngStream::new(5, i)).unwrap();
            assert_ne!(p.outcome.kind, OutcomeKind::Continuous);
            p.outcome.survives(2.0) as u8 as f64
        })
        .collect();
    let est = Estimate::from_samples(&alive);
    assert!(est.contains(libm::exp(-2.0 * c), 4.0), "{est:?}");
}

#[test]
fn same_stream_same_path() {
    let spec = zoo::logistic_feller();
    let a = simulate_sde_path(&spec, 1.0, 5.0, 1e-3, RngStream::new(3, 7)).unwrap();
    let b = simulate_sde_path(&spec, 1.0, 5.0, 1e-3, RngStream::new(3, 7)).unwrap();
    assert_eq!(a, b);
    let c = simulate_sde_path(&spec, 1.0, 5.0, 1e-3, RngStream::new(3, 8)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn jumps_do_not_touch_paths_below_threshold() {
    let spec = zoo::logistic_feller();
    let mut untouched = 0;
    for i in 0..200 {
        let s = RngStream::new(17, i);
        let plain = simulate_sde_path(&spec, 0.3, 1.0, 1e-3, s).unwrap();
        let jumpy = simulate_with_jumps(&spec, 0.3, 1.0, 1e-3, s).unwrap();
        if jumpy.jumps == 0 {
            untouched += 1;
            assert_eq!(plain.outcome, jumpy.outcome, "stream {i}");
        }
    }
    assert!(untouched > 50, "{untouched}");
}

#[test]
fn step_too_large_is_reported() {
    let spec = zoo::drifted_bm(real_fn(|y| y * y * y), real_fn(|_| 0.0)).unwrap();
    let model = SdeModel::new(&spec, SdeOptions::new(0.1)).unwrap();
    let err = model.path(100.0, 1.0, RngStream::new(1, 0)).unwrap_err();
    assert!(matches!(err, EngineError::StepTooLarge { .. }), "{err:?}");
}

#[test]
fn sde_engine_refuses_atoms_and_missing_sde() {
    assert_eq!(SdeModel::new(&zoo::drifted_bm_atomic(4), SdeOptions::new(1e-3)).err(), Some(EngineError::AtomicKilling));
    assert_eq!(SdeModel::new(&zoo::natural_inverse_killing(), SdeOptions::new(1e-3)).err(), Some(EngineError::NoSdeForm));
}

#[test]
fn chain_survival_matches_matrix_exponential() {
    let n = 30;
    let x: Vec<f64> = (1..=n).map(|i| i as f64 / 10.0).collect();
    let mass = vec![0.1; n];
    let kill: Vec<f64> = x.iter().map(|&xi| 0.1 * 0.3 * xi).collect();
    let gen = DiscretizedGenerator::from_parts(x.clone(), mass, kill, TopBoundary::Reflecting).unwrap();
    let chain = BirthDeath::from_generator(&gen);
    let t = 1.0;
    let p = transition_matrix(&gen, t);
    let i0 = 9;
    let exact: f64 = p.row(i0).iter().sum();
    let alive: Vec<f64> =
        (0..4000).map(|k| chain.path(x[i0], t, RngStream::new(21, k), None).unwrap().outcome.survives(t) as u8 as f64).collect();
    let est = Estimate::from_samples(&alive);
    assert!(est.contains(exact, 4.0), "{est:?} vs {exact}");
}

#[test]
fn chain_from_spec_requires_speed_in_every_cell() {
    let spec = DiffusionSpec::natural("gap", Measure1D::atomic(vec![Atom { location: 0.5, mass: 1.0 }]).unwrap(), Measure1D::zero());
    let grid = qsdlab_core::grid::Grid::natural(vec![0.25, 0.5, 0.75]).unwrap();
    assert!(BirthDeath::from_spec(&spec, &grid).is_err());
}

#[test]
fn feller_hitting_matches_closed_form() {
    let exact = libm::exp(-1.0);
    let e = feller_hitting_exact(1.0, 2.0, 20_000, 1, 4);
    assert!(e.contains(exact, 4.0), "{e:?}");
    let b = feller_hitting_check(1.0, 2.0, 20_000, 1e-3, 4, FellerScheme::Bessel).unwrap();
    assert!(b.contains(exact, 4.0), "{b:?}");
}

#[test]
fn coming_down_needs_truncation_and_is_monotone() {
    let m = Measure1D::from_density(real_fn(|x| if x < 1.0 { 1.0 } else { libm::exp(-(x - 1.0)) }));
    let k = Measure1D::lebesgue(1.0).with_support(0.0, 1.0).unwrap();
    let spec = DiffusionSpec::natural("finite killing", m, k);
    assert_eq!(coming_down_probability(&spec, 2.0, 1.0, 10, 1e-2, 1, None).err(), Some(EngineError::UnboundedSupport));
    let xs = [0.25, 0.5, 1.0, 2.0, 4.0];
    let vals: Vec<f64> =
        xs.iter().map(|&x| coming_down_probability(&spec, 2.0, x, 2000, 1e-2, 9, Some(6.0)).unwrap().estimate.value).collect();
    for w in vals.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{vals:?}");
    }
    assert!(vals[0] > 0.0 && vals[0] < 1.0, "{vals:?}");
}
