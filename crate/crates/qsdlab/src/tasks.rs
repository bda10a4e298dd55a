//! Task runners. Each writes its tables into the output directory and
//! fills the summary report.

use serde::Serialize;
use serde_json::json;
use std::path::Path;

use qsdlab_core::criteria::{self, CriteriaOptions, Verdict};
use qsdlab_core::engine::{
    coming_down_probability, feller_hitting_check, BirthDeath, Dynamics, FellerScheme, Record, RngStream, SdeModel, SdeOptions,
};
use qsdlab_core::grid::{Grid, GridSpec};
use qsdlab_core::measures::{classify_boundaries, natural_scale_form};
use qsdlab_core::parallel::map_indexed;
use qsdlab_core::qsd::{
    estimate_eta, estimate_lambda0, estimate_qsd, evolve_conditioned_ensemble, fit_convergence_rate, occupation, quantile_edges,
    sample_quantile_edges, simulate_qprocess, tv_distance, tv_noise_floor, EnsembleConfig, EtaConfig, Histogram, InitialLaw,
    Lambda0Config, MonotoneCubic,
};
use qsdlab_core::spectral::{
    discretize_generator, lambda0_bracket, principal_eigenpair, qprocess_invariant, qprocess_kernel, DiscretizedGenerator,
    SpectralSolution, TopBoundary,
};

use crate::config::{ExperimentConfig, Numerics, Task};
use crate::model::{self, BuiltModel, Family};
use crate::report::{num, Report, Table, Writer};
use crate::RunError;

/// Failure of a task step.
#[derive(Debug)]
pub enum Step {
    Numeric(String),
    Io(std::io::Error),
}

impl From<std::io::Error> for Step {
    fn from(e: std::io::Error) -> Self {
        Step::Io(e)
    }
}

macro_rules! numeric_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Step {
            fn from(e: $t) -> Self {
                Step::Numeric(e.to_string())
            }
        }
    )*};
}

numeric_from!(
    qsdlab_core::Error,
    qsdlab_core::measures::MeasureError,
    qsdlab_core::engine::EngineError,
    qsdlab_core::qsd::QsdError,
    qsdlab_core::spectral::SpectralError,
    qsdlab_core::criteria::CriteriaError
);

/// Kernel checks are reported at these times.
pub const KERNEL_TIMES: [f64; 3] = [0.5, 1.0, 2.0];

/// Seed for one purpose of a run; distinct tags give independent streams.
fn sub_seed(seed: u64, tag: u64) -> u64 {
    RngStream::fork_seed(seed, tag)
}

pub struct Spectral {
    pub grid: Grid,
    pub gen: DiscretizedGenerator,
    pub sol: SpectralSolution,
}

pub fn grid_top(built: &BuiltModel, n: &Numerics) -> Option<f64> {
    n.grid_top.or_else(|| built.spec.entrance_truncation(1e-12))
}

pub fn spectral(built: &BuiltModel, nodes: usize, top: f64) -> Result<Spectral, Step> {
    let nat = natural_scale_form(&built.spec)?;
    let grid = Grid::build(&nat, &GridSpec::new(nodes, top))?;
    let gen = discretize_generator(&nat, &grid, TopBoundary::Reflecting)?;
    let sol = principal_eigenpair(&gen)?;
    Ok(Spectral { grid, gen, sol })
}

enum Engine {
    Sde(SdeModel),
    Chain(BirthDeath),
}

fn engine(built: &BuiltModel, n: &Numerics, grid: Option<&Grid>, top: Option<f64>) -> Result<Engine, Step> {
    if built.has_sde() {
        let mut opts = SdeOptions::for_spec(&built.spec, n.dt);
        if n.grid_top.is_some() {
            opts.y_max = n.grid_top;
        }
        opts.jumps = built.jumps;
        return Ok(Engine::Sde(SdeModel::new(&built.spec, opts)?));
    }
    let grid = match (grid, top) {
        (Some(g), _) => g.clone(),
        (None, Some(t)) => Grid::build(&natural_scale_form(&built.spec)?, &GridSpec::new(n.grid_nodes, t))?,
        (None, None) => return Err(Step::Numeric("chain engine needs numerics.grid_top".into())),
    };
    Ok(Engine::Chain(BirthDeath::from_spec(&built.spec, &grid)?))
}

pub fn run_task(task: Task, cfg: &ExperimentConfig, out: &Path) -> Result<Report, RunError> {
    let w = Writer::new(out, cfg)?;
    let mut r = Report::new(task, model_label(cfg), cfg.numerics.seed);
    let res = match task {
        Task::Classify => classify(cfg, &mut r),
        Task::Criteria => criteria_task(cfg, &w, &mut r),
        Task::Qsd => qsd(cfg, &w, &mut r),
        Task::Qprocess => qprocess(cfg, &w, &mut r),
        Task::ComingDown => coming_down(cfg, &w, &mut r),
        Task::Validate => validate(cfg, &w, &mut r),
    };
    match res {
        Err(Step::Io(e)) => return Err(RunError::Io(e)),
        Err(Step::Numeric(msg)) => r.fail(msg),
        Ok(()) => {}
    }
    w.summary(&mut r)?;
    let started = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    w.log(&[
        format!("task={}", task.name()),
        format!("finished_unix={started}"),
        format!("threads={}", rayon::current_num_threads()),
        format!("incomplete={}", r.incomplete),
    ])?;
    if r.incomplete {
        return Err(RunError::Numeric(r.errors.join("; ")));
    }
    if task == Task::Validate {
        let failed = r.results.get("failed").and_then(|v| v.as_u64()).unwrap_or(0) as usize;
        if failed > 0 {
            return Err(RunError::Validation(failed));
        }
    }
    Ok(r)
}

fn model_label(cfg: &ExperimentConfig) -> &'static str {
    use crate::config::ModelConfig::*;
    match cfg.model {
        Logistic { .. } => "logistic",
        DriftedBm { .. } => "drifted_bm",
        NaturalScale { .. } => "natural_scale",
        JumpExtended { .. } => "jump_extended",
    }
}

fn classify(cfg: &ExperimentConfig, r: &mut Report) -> Result<(), Step> {
    let built = model::build(&cfg.model)?;
    r.put("natural_scale", built.spec.is_natural());
    r.put("boundaries", classify_boundaries(&built.spec)?);
    Ok(())
}

#[derive(Serialize)]
struct CheckedVerdict {
    verdict: Verdict,
    refined_status: criteria::Status,
    stable_under_refinement: bool,
}

fn checked(v: Verdict, refined: Verdict) -> CheckedVerdict {
    CheckedVerdict { stable_under_refinement: v.status == refined.status, refined_status: refined.status, verdict: v }
}

fn criteria_task(cfg: &ExperimentConfig, w: &Writer, r: &mut Report) -> Result<(), Step> {
    let built = model::build(&cfg.model)?;
    let nat = natural_scale_form(&built.spec)?;
    let fine = CriteriaOptions::default().refined();
    let base = CriteriaOptions::default();
    type Check = fn(&qsdlab_core::measures::DiffusionSpec, &CriteriaOptions) -> Result<Verdict, criteria::CriteriaError>;
    let general: [(&str, Check, bool); 4] = [
        ("matsumoto", criteria::check_matsumoto_with, true),
        ("condition_c", criteria::check_condition_c_with, true),
        ("condition_c_prime", criteria::check_condition_cprime_with, true),
        ("condition_d", criteria::check_condition_d_with, false),
    ];
    let mut out = Vec::new();
    let mut statuses = serde_json::Map::new();
    for (name, f, natural) in general {
        let spec = if natural { &nat } else { &built.spec };
        match (f(spec, &base), f(spec, &fine)) {
            (Ok(v), Ok(fv)) => {
                statuses.insert(name.into(), serde_json::to_value(v.status).unwrap());
                out.push(checked(v, fv));
            }
            (Err(e), _) | (_, Err(e)) => r.warn(format!("{name}: {e}")),
        }
    }
    let family = match &built.family {
        Family::Logistic { h, kappa, beta } => Some((
            "logistic_model",
            criteria::check_logistic_model_with(h, kappa, Some(*beta), &base),
            criteria::check_logistic_model_with(h, kappa, Some(*beta), &fine),
        )),
        Family::DriftedBm { h, kappa } if !built.spec.killing.has_atoms() => Some((
            "drifted_bm",
            criteria::check_drifted_bm_with(h, kappa, &base),
            criteria::check_drifted_bm_with(h, kappa, &fine),
        )),
        _ => None,
    };
    if let Some((name, v, fv)) = family {
        statuses.insert(name.into(), serde_json::to_value(v.status).unwrap());
        out.push(checked(v, fv));
    }
    let satisfied = out.iter().any(|c| c.verdict.status == criteria::Status::Satisfied);
    r.put("statuses", statuses);
    r.put("any_satisfied", satisfied);
    r.put("all_stable", out.iter().all(|c| c.stable_under_refinement));
    w.json(r, "criteria", &out)?;
    Ok(())
}

fn qsd(cfg: &ExperimentConfig, w: &Writer, r: &mut Report) -> Result<(), Step> {
    let n = &cfg.numerics;
    let built = model::build(&cfg.model)?;
    let top = grid_top(&built, n);
    let sp = if built.jumps.is_some() {
        r.warn("no spectral reference for jump models");
        None
    } else if let Some(t) = top {
        match spectral(&built, n.grid_nodes, t) {
            Ok(s) => Some(s),
            Err(Step::Numeric(e)) => {
                r.fail(format!("spectral: {e}"));
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        r.warn("no grid top (set numerics.grid_top); spectral reference skipped");
        None
    };
    if let Some(s) = &sp {
        let bracket = lambda0_bracket(&s.gen).ok();
        let info = json!({
            "lambda0": s.sol.lambda0,
            "lambda1": s.sol.lambda1,
            "gap": s.sol.gap,
            "residuals": {"right": s.sol.residual_right, "left": s.sol.residual_left, "norm_l": s.sol.norm_l},
            "bracket": bracket,
            "grid_nodes": s.grid.y.len(),
            "grid_top": s.grid.y_edges.last(),
        });
        w.json(r, "spectral", &info)?;
        r.put("spectral", info);
        let mut t = Table::new("spectral", &["x", "alpha", "eta"]);
        for i in 0..s.grid.y.len() {
            t.push(vec![s.grid.y[i], s.sol.alpha[i], s.sol.eta[i]]);
        }
        w.table(r, &t)?;
    }
    match engine(&built, n, sp.as_ref().map(|s| &s.grid), top)? {
        Engine::Sde(m) => {
            qsd_body(&m, cfg, sp.as_ref(), w, r)?;
            if cfg.output.dump_paths > 0 {
                dump_paths(&m, cfg, w, r)?;
            }
        }
        Engine::Chain(m) => {
            r.put("engine", "chain");
            qsd_body(&m, cfg, sp.as_ref(), w, r)?;
        }
    }
    Ok(())
}

fn qsd_body<D: Dynamics>(m: &D, cfg: &ExperimentConfig, sp: Option<&Spectral>, w: &Writer, r: &mut Report) -> Result<(), Step> {
    let n = &cfg.numerics;
    let x0 = InitialLaw::Dirac { at: n.x0 };
    let k = (n.t_end / n.snapshot_every + 1e-9).floor() as usize;
    let snapshot_times: Vec<f64> = (1..=k).map(|i| i as f64 * n.snapshot_every).collect();
    let ens = evolve_conditioned_ensemble(
        m,
        &x0,
        &EnsembleConfig { n_particles: n.n_particles, t_end: n.t_end, slice: n.slice, mode: n.mode, seed: sub_seed(n.seed, 1), snapshot_times },
    )?;
    let alpha_ref = match sp {
        Some(s) => Some(Histogram::from_weights(s.grid.y_edges.clone(), s.sol.alpha.clone())?),
        None => None,
    };
    let edges = match &alpha_ref {
        Some(h) => quantile_edges(h, n.bins),
        None => sample_quantile_edges(&ens.positions, n.bins),
    };
    let alpha_hat = estimate_qsd(&ens.positions, &edges)?;
    let alpha_sp = alpha_ref.map(|h| h.rebin(&edges)).transpose()?;

    let mut tv = Table::new("tv", &["t", "tv", "noise_floor", "survival"]);
    let mut qsd_info = json!({
        "mode": n.mode,
        "n_particles": n.n_particles,
        "t_end": n.t_end,
        "resampling_events": ens.generation_log,
    });
    if let Some(a) = &alpha_sp {
        let mut curve = Vec::new();
        for s in &ens.snapshots {
            let d = tv_distance(&estimate_qsd(&s.positions, &edges)?, a)?;
            tv.push(vec![s.t, d, tv_noise_floor(&a.probs, s.positions.len()), s.survival]);
            curve.push((s.t, d));
        }
        let floor = tv_noise_floor(&a.probs, ens.positions.len());
        let final_tv = tv_distance(&alpha_hat, a)?;
        qsd_info["tv_final"] = json!(final_tv);
        qsd_info["noise_floor"] = json!(floor);
        match fit_convergence_rate(&curve, 2.0 * floor, 0.5) {
            Ok(fit) => {
                r.put("gamma", fit.gamma);
                r.put("C", fit.c);
                r.put("rate_fit", &fit);
            }
            Err(e) => r.warn(format!("rate fit: {e}")),
        }
    } else {
        for s in &ens.snapshots {
            tv.push(vec![s.t, f64::NAN, f64::NAN, s.survival]);
        }
    }
    r.put("qsd", qsd_info);
    w.table(r, &tv)?;

    let lam_sp = sp.map(|s| s.sol.lambda0);
    let lam = match estimate_lambda0(m, &x0, &Lambda0Config::new(n.n_paths, n.horizon, sub_seed(n.seed, 2))) {
        Ok(est) => {
            r.put("lambda0", est.lambda0);
            r.put("ci", [est.ci_low, est.ci_high]);
            r.put(
                "lambda0_fit",
                json!({"r2": est.r2, "stderr": est.stderr, "window": [est.window_start, est.window_end], "n_paths": est.n_paths,
                       "relative_error": lam_sp.map(|l| (est.lambda0 - l).abs() / l)}),
            );
            let eta0 = sp.map(|s| MonotoneCubic::new(s.grid.y.clone(), s.sol.eta.clone()).eval(n.x0));
            let mut t = Table::new("survival", &["t", "survival_fraction", "survival_asymptotic"]);
            for &(tt, sv) in &est.survival {
                let asym = match (eta0, lam_sp) {
                    (Some(e), Some(l)) => e * (-l * tt).exp(),
                    _ => f64::NAN,
                };
                t.push(vec![tt, sv, asym]);
            }
            w.table(r, &t)?;
            Some(est.lambda0)
        }
        Err(e) => {
            r.fail(format!("lambda0: {e}"));
            None
        }
    };

    let eta_sp = sp.map(|s| MonotoneCubic::new(s.grid.y.clone(), s.sol.eta.clone()));
    let mut eta_hat = None;
    if let (Some(l), true) = (lam.or(lam_sp), n.eta_paths > 0) {
        let ec = EtaConfig { x_grid: n.eta_x.clone(), t_star: n.eta_t_star, n_paths: n.eta_paths, seed: sub_seed(n.seed, 3) };
        match estimate_eta(m, &ec, l, &ens.positions) {
            Ok(mut e) => {
                if let Some(s) = sp {
                    e.normalize_with(&s.grid.y, Some(&s.sol.alpha))?;
                }
                let mut t = Table::new("eta", &["x", "eta_hat", "stderr", "survival", "eta_spectral"]);
                let mut sup: f64 = 0.0;
                for i in 0..e.x.len() {
                    let es = eta_sp.as_ref().map_or(f64::NAN, |f| f.eval(e.x[i]));
                    if es.is_finite() {
                        sup = sup.max((e.eta[i] - es).abs());
                    }
                    t.push(vec![e.x[i], e.eta[i], e.stderr[i], e.survival[i], es]);
                }
                w.table(r, &t)?;
                if let Some(f) = &eta_sp {
                    let max_eta = f.y.iter().cloned().fold(0.0, f64::max);
                    r.put("eta_sup_deviation", sup / max_eta);
                }
                eta_hat = Some(e.interpolant());
            }
            Err(e) => r.fail(format!("eta: {e}")),
        }
    }

    let mut t = Table::new("alpha", &["x", "alpha_hat", "alpha_spectral", "eta_hat", "eta_spectral", "bin_lo", "bin_hi"]);
    for (i, c) in alpha_hat.centres().into_iter().enumerate() {
        t.push(vec![
            c,
            alpha_hat.probs[i],
            alpha_sp.as_ref().map_or(f64::NAN, |a| a.probs[i]),
            eta_hat.as_ref().map_or(f64::NAN, |f| f.eval(c)),
            eta_sp.as_ref().map_or(f64::NAN, |f| f.eval(c)),
            edges[i],
            edges[i + 1],
        ]);
    }
    w.table(r, &t)?;
    Ok(())
}

fn dump_paths(m: &SdeModel, cfg: &ExperimentConfig, w: &Writer, r: &mut Report) -> Result<(), Step> {
    let n = &cfg.numerics;
    let mut m = m.clone();
    m.opts.record = Record::Every(((0.01 / n.dt).round() as usize).max(1));
    let seed = sub_seed(n.seed, 8);
    let paths = map_indexed(cfg.output.dump_paths, |i| m.path(n.x0, n.horizon, RngStream::new(seed, i as u64)));
    let mut t = Table::new("paths", &["path_id", "t", "x", "outcome_kind", "outcome_time"]);
    for (i, p) in paths.into_iter().enumerate() {
        let p = p?;
        let kind = serde_json::to_value(p.outcome.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        for (tt, y) in p.times.iter().zip(&p.states) {
            t.push_cells(vec![i.to_string(), num(*tt), num(*y), kind.clone(), num(p.outcome.time)]);
        }
    }
    Ok(w.table(r, &t)?)
}

fn qprocess(cfg: &ExperimentConfig, w: &Writer, r: &mut Report) -> Result<(), Step> {
    let n = &cfg.numerics;
    let built = model::build(&cfg.model)?;
    if built.jumps.is_some() {
        return Err(Step::Numeric("the Q-process task needs a diffusion without jumps".into()));
    }
    let top = grid_top(&built, n).ok_or_else(|| Step::Numeric("set numerics.grid_top for this model".into()))?;
    let s = spectral(&built, n.qprocess_grid_nodes, top)?;
    r.put("lambda0", s.sol.lambda0);
    let beta = qprocess_invariant(&s.sol);
    let mut kt = Table::new("kernel", &["t", "max_row_deviation", "beta_invariance_l1"]);
    let mut worst_row: f64 = 0.0;
    let mut worst_beta: f64 = 0.0;
    for t in KERNEL_TIMES {
        let k = qprocess_kernel(&s.sol, &s.gen, t)?;
        let row = (0..k.n).map(|i| (k.row(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
        let bp = k.vec_mul(&beta);
        let l1: f64 = bp.iter().zip(&beta).map(|(a, b)| (a - b).abs()).sum();
        worst_row = worst_row.max(row);
        worst_beta = worst_beta.max(l1);
        kt.push(vec![t, row, l1]);
    }
    w.table(r, &kt)?;
    r.put("kernel", json!({"max_row_deviation": worst_row, "beta_invariance_l1": worst_beta}));

    let bh = Histogram::from_weights(s.grid.y_edges.clone(), beta.clone())?;
    let edges = quantile_edges(&bh, n.bins);
    let bq = bh.rebin(&edges)?;
    let chain = BirthDeath::qprocess(&s.sol, &s.gen);
    let seed = sub_seed(n.seed, 4);
    let runs = map_indexed(n.qprocess_paths, |p| {
        occupation(&chain, n.x0, n.qprocess_horizon, n.sample_dt, n.burn_in, RngStream::new(seed, p as u64), &edges)
    });
    let mut counts = vec![0.0; edges.len() - 1];
    for c in runs {
        for (a, b) in counts.iter_mut().zip(c?) {
            *a += b;
        }
    }
    let chain_h = Histogram::from_weights(edges.clone(), counts)?;
    let tv_chain = tv_distance(&chain_h, &bq)?;
    let mut occ = json!({"paths": n.qprocess_paths, "horizon": n.qprocess_horizon, "tv_chain": tv_chain});

    let mut sde_h = None;
    if n.qprocess_sde_paths > 0 {
        if built.has_sde() {
            let model = SdeModel::new(&built.spec, SdeOptions::for_spec(&built.spec, n.dt))?;
            let eta = MonotoneCubic::new(s.grid.y.clone(), s.sol.eta.clone());
            let every = ((n.sample_dt / n.dt).round() as usize).max(1);
            let seed = sub_seed(n.seed, 5);
            let paths = map_indexed(n.qprocess_sde_paths, |p| {
                simulate_qprocess(&model, &eta, n.x0, n.qprocess_horizon, RngStream::new(seed, p as u64), every)
            });
            let mut counts = vec![0.0; edges.len() - 1];
            for p in paths {
                let p = p?;
                for (&t, &y) in p.times.iter().zip(&p.states) {
                    if t < n.burn_in {
                        continue;
                    }
                    let j = edges.partition_point(|&e| e <= y).saturating_sub(1).min(edges.len() - 2);
                    counts[j] += 1.0;
                }
            }
            let h = Histogram::from_weights(edges.clone(), counts)?;
            occ["tv_sde"] = json!(tv_distance(&h, &bq)?);
            occ["sde_paths"] = json!(n.qprocess_sde_paths);
            sde_h = Some(h);
        } else {
            r.warn("diffusion Q-process skipped: model has no SDE form");
        }
    }
    r.put("occupation", occ);
    let mut t = Table::new("occupation", &["bin_lo", "bin_hi", "beta", "chain", "sde"]);
    for i in 0..bq.probs.len() {
        t.push(vec![edges[i], edges[i + 1], bq.probs[i], chain_h.probs[i], sde_h.as_ref().map_or(f64::NAN, |h| h.probs[i])]);
    }
    w.table(r, &t)?;
    Ok(())
}

fn coming_down(cfg: &ExperimentConfig, w: &Writer, r: &mut Report) -> Result<(), Step> {
    let n = &cfg.numerics;
    let built = model::build(&cfg.model)?;
    let nat = natural_scale_form(&built.spec)?;
    let f = feller_hitting_check(1.0, 2.0, n.feller_paths, n.dt, sub_seed(n.seed, 7), FellerScheme::Bessel)?;
    let exact = (-1.0f64).exp();
    r.put("feller", json!({"estimate": f.value, "stderr": f.stderr, "exact": exact, "z": (f.value - exact) / f.stderr, "n_paths": f.n}));
    let seed = sub_seed(n.seed, 6);
    let mut t = Table::new("coming_down", &["truncation", "x", "estimate", "stderr", "ci_low", "ci_high"]);
    let mut monotone = true;
    for &level in &n.coming_down_truncation {
        let mut prev = f64::INFINITY;
        for &x in &n.coming_down_x {
            // Same seed for every x: the estimates are pathwise ordered.
            let cd = coming_down_probability(&nat, n.coming_down_t, x, n.coming_down_paths, n.coming_down_dt, seed, Some(level))?;
            let e = cd.estimate;
            monotone &= e.value <= prev;
            prev = e.value;
            t.push(vec![cd.truncation, x, e.value, e.stderr, e.ci_low, e.ci_high]);
        }
    }
    if !monotone {
        r.warn("coming-down estimates increase with x");
    }
    r.put("non_increasing_in_x", monotone);
    w.table(r, &t)?;
    Ok(())
}

fn validate(_cfg: &ExperimentConfig, w: &Writer, r: &mut Report) -> Result<(), Step> {
    let outcomes = crate::validate::run_suite(&w.dir.join("determinism"));
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let mut t = Table::new("validation", &["criterion", "passed"]);
    for o in &outcomes {
        t.push_cells(vec![o.id.to_string(), o.passed.to_string()]);
        eprintln!("{}", o.line());
    }
    w.table(r, &t)?;
    w.json(r, "validation", &outcomes)?;
    r.put("passed", outcomes.len() - failed);
    r.put("failed", failed);
    Ok(())
}
