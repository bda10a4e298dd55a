use super::*;
use crate::measures::{Atom, ScaleFunction};
use crate::real_fn;
use crate::zoo;
use proptest::prelude::*;

fn natural(m: Measure1D, k: Measure1D) -> DiffusionSpec {
    DiffusionSpec::natural("test", m, k)
}

/// Lebesgue on (0,1) with an exponential tail above 1.
fn lebesgue_with_tail() -> Measure1D {
    Measure1D::from_density(real_fn(|x| if x < 1.0 { 1.0 } else { libm::exp(-(x - 1.0)) }))
}

fn nested_value(v: &Verdict) -> Option<f64> {
    v.evidence.iter().find(|e| e.condition.starts_with("∫₀¹ (1/x)")).and_then(|e| e.value)
}

#[test]
fn matsumoto_inverse_density_gives_half_c() {
    for &c in &[0.5, 1.0, 3.0] {
        let m = Measure1D::from_density(real_fn(move |z| if z < 1.0 { c / z } else { c * libm::exp(-(z - 1.0)) }));
        let v = check_matsumoto(&natural(m, Measure1D::zero())).unwrap();
        assert_eq!(v.status, Status::Satisfied, "{v:?}");
        let got = nested_value(&v).unwrap();
        assert!((got - c / 2.0).abs() < 1e-6 * c, "c = {c}: {got}");
    }
}

#[test]
fn matsumoto_no_mass_near_zero() {
    let m = Measure1D::from_density(real_fn(|z| if z < 0.25 { 0.0 } else { libm::exp(-z) }));
    let v = check_matsumoto(&natural(m, Measure1D::zero())).unwrap();
    assert_eq!(v.status, Status::Satisfied, "{v:?}");
}

#[test]
fn matsumoto_cubic_singularity_violated() {
    let m = Measure1D::from_density(real_fn(|z| if z < 1.0 { libm::pow(z, -3.0) } else { libm::exp(-z) }));
    let v = check_matsumoto(&natural(m, Measure1D::zero())).unwrap();
    assert_eq!(v.status, Status::Violated, "{v:?}");
}

#[test]
fn matsumoto_requires_natural_scale() {
    assert_eq!(check_matsumoto(&zoo::logistic_feller()).unwrap_err(), CriteriaError::NotNatural);
    assert!(check_condition_c(&zoo::logistic_feller()).is_err());
    assert!(check_condition_cprime(&zoo::logistic_feller()).is_err());
}

#[test]
fn matsumoto_atoms_on_shell_boundaries() {
    // Atoms at 2^{-n} with mass 2^{-n}: z² m has shells 8^{-n}.
    let atoms = (1..30).map(|n| Atom { location: libm::ldexp(1.0, -n), mass: libm::ldexp(1.0, -n) }).collect();
    let m = lebesgue_with_tail().with_atoms(atoms).unwrap();
    let v = check_matsumoto(&natural(m, Measure1D::zero())).unwrap();
    assert_eq!(v.status, Status::Satisfied, "{v:?}");
}

#[test]
fn condition_c_inverse_killing_via_density_route() {
    let v = check_condition_c(&zoo::natural_inverse_killing()).unwrap();
    assert_eq!(v.status, Status::Satisfied, "{v:?}");
    assert!(v.notes.iter().any(|n| n.contains("x·dk/dx")), "{:?}", v.notes);
}

#[test]
fn condition_c_atomic_killing_via_mass_route() {
    let atoms = (1..40).map(|n| Atom { location: libm::ldexp(1.0, -n), mass: libm::ldexp(1.0, -n) }).collect();
    let k = Measure1D::atomic(atoms).unwrap();
    let v = check_condition_c(&natural(lebesgue_with_tail(), k)).unwrap();
    assert_eq!(v.status, Status::Satisfied, "{v:?}");
    assert!(v.notes.iter().any(|n| n.contains("finite killing mass")), "{:?}", v.notes);
}

#[test]
fn condition_c_inverse_square_killing_not_satisfied() {
    let k = Measure1D::from_density(real_fn(|x| if x < 1.0 { 1.0 / (x * x) } else { 0.0 }));
    let v = check_condition_c(&natural(lebesgue_with_tail(), k)).unwrap();
    assert_eq!(v.status, Status::Inconclusive, "{v:?}");
}

#[test]
fn condition_c_infinite_speed_moment_violated() {
    let m = Measure1D::from_density(real_fn(|x| 1.0 / (1.0 + x * x)));
    let v = check_condition_c(&natural(m, Measure1D::zero())).unwrap();
    assert_eq!(v.status, Status::Violated, "{v:?}");
}

#[test]
fn cprime_constant_ratio() {
    let m = lebesgue_with_tail();
    let v = check_condition_cprime(&natural(m.clone(), m.scaled(0.7))).unwrap();
    assert_eq!(v.status, Status::Satisfied, "{v:?}");
}

#[test]
fn cprime_logistic_feller_natural_form() {
    let nat = natural_scale_form(&zoo::logistic_feller()).unwrap();
    let v = check_condition_cprime(&nat).unwrap();
    assert_eq!(v.status, Status::Satisfied, "{v:?}");
}

#[test]
fn cprime_inverse_sqrt_ratio_violated() {
    let m = lebesgue_with_tail();
    let k = Measure1D::from_density(real_fn(|x| if x < 1.0 { 1.0 / libm::sqrt(x) } else { 0.0 }));
    let v = check_condition_cprime(&natural(m, k)).unwrap();
    assert_eq!(v.status, Status::Violated, "{v:?}");
}

#[test]
fn cprime_killing_atom_without_speed_atom() {
    let k = Measure1D::atomic(vec![Atom { location: 0.005, mass: 1.0 }]).unwrap();
    let v = check_condition_cprime(&natural(lebesgue_with_tail(), k)).unwrap();
    // ε = 1 and 0.1 contain the atom, ε = 0.01 too; nothing is bounded.
    assert_ne!(v.status, Status::Satisfied, "{v:?}");
    assert!(v.evidence.iter().any(|e| e.diagnostic.contains("without speed atom")));
}

#[test]
fn condition_d_logistic_feller_route_i() {
    let v = check_condition_d(&zoo::logistic_feller()).unwrap();
    assert_eq!(v.status, Status::Satisfied, "{v:?}");
    assert!(v.notes.iter().any(|n| n.contains("(i)")), "{:?}", v.notes);
}

#[test]
fn condition_d_drifted_bm_density_and_atoms() {
    let v = check_condition_d(&zoo::drifted_bm_square()).unwrap();
    assert_eq!(v.status, Status::Satisfied, "{v:?}");
    let v = check_condition_d(&zoo::drifted_bm_atomic(12)).unwrap();
    assert_eq!(v.status, Status::Satisfied, "{v:?}");
}

#[test]
fn condition_d_quadratic_scale_route_ii_fails() {
    // s(y) = y² near 0, linear beyond 1; k density 1/s.
    let s = ScaleFunction::explicit(
        "quad",
        real_fn(|y| if y < 1.0 { y * y } else { 2.0 * y - 1.0 }),
        Some(real_fn(|y| if y < 1.0 { 2.0 * y } else { 2.0 })),
        Some(real_fn(|x| if x < 1.0 { libm::sqrt(x) } else { 0.5 * (x + 1.0) })),
    );
    let m = Measure1D::from_density(real_fn(|y| libm::exp(-y)));
    let k = Measure1D::from_density(real_fn(|y| if y < 1.0 { 1.0 / (y * y) } else { 0.0 }));
    let v = check_condition_d(&DiffusionSpec::explicit("quad", s, m, k)).unwrap();
    assert_ne!(v.status, Status::Satisfied, "{v:?}");
    let ii: Vec<_> = v.evidence.iter().filter(|e| e.condition.starts_with("(ii)")).collect();
    assert!(!ii.is_empty() && ii.iter().all(|e| e.value.is_none()), "{ii:?}");
}

#[test]
fn logistic_model_examples() {
    let v = check_logistic_model(&real_fn(|y| 1.0 - y), &real_fn(|y| libm::fmax(libm::sin(1.0 / y), libm::sqrt(y))), None);
    assert_eq!(v.status, Status::Satisfied, "{v:?}");
    let v = check_logistic_model(&real_fn(|y| -y), &real_fn(|_| 0.0), Some(1.0));
    assert_eq!(v.status, Status::Satisfied, "{v:?}");
    let v = check_logistic_model(&real_fn(|y| -libm::log(y)), &real_fn(|_| 1.0), None);
    assert_eq!(v.status, Status::Inconclusive, "{v:?}");
}

#[test]
fn logistic_model_heavy_killing_at_infinity() {
    // κ = y² beats y^{1+β} with β = 1.
    let v = check_logistic_model(&real_fn(|y| 1.0 - y), &real_fn(|y| y * y), None);
    assert_eq!(v.status, Status::Inconclusive, "{v:?}");
}

#[test]
fn drifted_bm_examples() {
    let kap = real_fn(|y| libm::fmax(1.0 / libm::sqrt(y), libm::sqrt(y)));
    let v = check_drifted_bm(&real_fn(|y| y * y), &kap);
    assert_eq!(v.status, Status::Satisfied, "{v:?}");
    let v = check_drifted_bm(&real_fn(|y| y * y), &real_fn(|_| 0.0));
    assert_eq!(v.status, Status::Satisfied, "{v:?}");
    let v = check_drifted_bm(&real_fn(|y| y), &real_fn(|_| 0.0));
    assert_eq!(v.status, Status::Inconclusive, "{v:?}");
}

#[test]
fn verdicts_stable_under_refinement() {
    let opts = CriteriaOptions::default();
    let fine = opts.refined();
    let specs = [zoo::natural_inverse_killing(), natural_scale_form(&zoo::logistic_feller()).unwrap()];
    for spec in &specs {
        let a = check_condition_c_with(spec, &opts).unwrap();
        let b = check_condition_c_with(spec, &fine).unwrap();
        assert_eq!(a.status, b.status);
        let (va, vb) = (nested_value(&a).unwrap(), nested_value(&b).unwrap());
        assert!((va / vb - 1.0).abs() < 1e-3, "{va} vs {vb}");
    }
}

#[test]
fn verdict_serializes() {
    let v = check_condition_c(&zoo::natural_inverse_killing()).unwrap();
    let s = serde_json::to_string(&v).unwrap();
    assert!(s.contains("\"status\":\"satisfied\""), "{s}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scaling_killing_never_creates_violation(c in 0.01f64..1.0) {
        let base = zoo::natural_inverse_killing();
        let scaled = DiffusionSpec::natural("scaled", base.speed.clone(), base.killing.scaled(c));
        let v = check_condition_c(&scaled).unwrap();
        prop_assert_eq!(v.status, Status::Satisfied);
    }

    #[test]
    fn nested_integral_linear_in_c(c in 0.1f64..10.0) {
        let m = Measure1D::from_density(real_fn(move |z| if z < 1.0 { c / z } else { 0.0 }));
        let v = check_matsumoto(&natural(m, Measure1D::zero())).unwrap();
        let got = nested_value(&v).unwrap();
        prop_assert!((got - c / 2.0).abs() < 1e-6 * c);
    }
}

#[test]
fn condition_d_oscillating_killing_route_ii() {
    let v = check_condition_d(&zoo::logistic_oscillating()).unwrap();
    assert_eq!(v.status, Status::Satisfied, "{v:?}");
    assert!(v.notes.iter().any(|n| n.contains("(ii)")), "{:?}", v.notes);
}
