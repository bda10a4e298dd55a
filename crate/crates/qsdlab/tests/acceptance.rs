//! Acceptance suite. Runs as a plain binary so that one line per criterion
//! shows up in the `cargo test` output.
//!
//! The tolerances are pinned here, independently of the library constants:
//! each measured value is re-judged against the literal below.

use std::process::ExitCode;

use qsdlab::validate::{self, CriterionOutcome};

/// (criterion, check, comparison, limit)
const PINNED: &[(u32, &str, &str, f64)] = &[
    (1, "relative_error", "<", 0.05),
    (1, "runtime_s", "<", 120.0),
    (2, "tv_fleming_viot_vs_spectral", "<", 0.05),
    (2, "tv_fleming_viot_vs_renormalize", "<", 0.05),
    (3, "right_residual_over_norm", "<=", 1e-8),
    (3, "left_residual_over_norm", "<=", 1e-8),
    (3, "alpha_eta_minus_one", "<=", 1e-12),
    (3, "killing_shift_error", "<=", 1e-10),
    (4, "max_pairwise_tv_t10", "<", 0.05),
    (4, "gamma", ">", 0.0),
    (4, "r2", ">", 0.9),
    (4, "gamma_vs_gap_relative", "<", 0.25),
    (5, "max_row_deviation", "<=", 1e-10),
    (5, "beta_invariance_l1", "<", 1e-9),
    (5, "occupation_tv", "<", 0.05),
    (6, "max_ratio_over_median_near_0", "<", 3.0),
    (6, "sup_distance", "<", 0.1),
    (7, "feller_z", "<=", 3.0),
    (7, "non_increasing_in_x", "=", 1.0),
    (7, "heavy_killing_decreasing", "=", 1.0),
    (7, "heavy_killing_at_4x_truncation", "<", 0.01),
    (8, "logistic_oscillating_model", "=", 1.0),
    (8, "logistic_oscillating_model_stable", "=", 1.0),
    (8, "logistic_oscillating_d", "=", 1.0),
    (8, "logistic_oscillating_d_stable", "=", 1.0),
    (8, "drifted_bm_density_model", "=", 1.0),
    (8, "drifted_bm_density_model_stable", "=", 1.0),
    (8, "drifted_bm_density_d", "=", 1.0),
    (8, "drifted_bm_density_d_stable", "=", 1.0),
    (8, "drifted_bm_atomic_d", "=", 1.0),
    (8, "drifted_bm_atomic_d_stable", "=", 1.0),
    (8, "inverse_square_not_satisfied", "=", 1.0),
    (8, "inverse_square_not_satisfied_stable", "=", 1.0),
    (9, "c1", ">", 0.0),
    (9, "c2", ">", 0.0),
    (10, "classify_identical", "=", 1.0),
    (10, "criteria_identical", "=", 1.0),
    (10, "qsd_identical", "=", 1.0),
    (10, "qprocess_identical", "=", 1.0),
    (10, "coming_down_identical", "=", 1.0),
];

fn judge(o: &CriterionOutcome) -> (bool, Vec<String>) {
    let mut notes = Vec::new();
    let mut ok = o.error.is_none();
    if let Some(e) = &o.error {
        notes.push(format!("error: {e}"));
    }
    for &(id, name, op, limit) in PINNED.iter().filter(|p| p.0 == o.id) {
        let _ = id;
        let Some(c) = o.check(name) else {
            ok = false;
            notes.push(format!("{name}: not measured"));
            continue;
        };
        let pass = match op {
            "<" => c.value < limit,
            "<=" => c.value <= limit,
            ">" => c.value > limit,
            _ => c.value == limit,
        };
        ok &= pass;
        notes.push(format!("{} {name} = {:.4e} ({op} {limit:e})", if pass { "ok  " } else { "FAIL" }, c.value));
    }
    (ok, notes)
}

fn main() -> ExitCode {
    let scratch = std::env::temp_dir().join(format!("qsdlab-acceptance-{}", std::process::id()));
    let big = validate::logistic_reference(800);
    let small = validate::logistic_reference(200);
    let mut outcomes = Vec::new();
    match (&big, &small) {
        (Ok(b), Ok(s)) => {
            outcomes.push(validate::criterion_1(b));
            outcomes.push(validate::criterion_2(b));
            outcomes.push(validate::criterion_3(b));
            outcomes.push(validate::criterion_4(b));
            outcomes.push(validate::criterion_5(s));
            outcomes.push(validate::criterion_6(b));
            outcomes.push(validate::criterion_7());
            outcomes.push(validate::criterion_8());
            outcomes.push(validate::criterion_9(s));
            outcomes.push(validate::criterion_10(&scratch));
        }
        (b, s) => {
            println!("acceptance: FAIL cannot build the spectral reference: {:?} {:?}", b.as_ref().err(), s.as_ref().err());
            return ExitCode::FAILURE;
        }
    }
    let _ = std::fs::remove_dir_all(&scratch);
    let mut failed = 0;
    for o in &outcomes {
        let (ok, notes) = judge(o);
        // The library verdict must agree with the pinned one.
        let ok = ok && o.passed;
        if !ok {
            failed += 1;
        }
        println!("criterion {:>2}: {}  {} ({:.1} s)", o.id, if ok { "PASS" } else { "FAIL" }, o.title, o.seconds);
        for n in notes {
            println!("    {n}");
        }
    }
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
