//! Checkers for the sufficient conditions of exponential convergence to a
//! unique QSD. Each returns a [`Verdict`] with the integrals it used.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::Serialize;

use crate::math::{exp, ln, powf};
use crate::measures::quadrature::shell_decision;
use crate::measures::{
    natural_scale_form, DiffusionSpec, Integrand, IntegrationOptions, Measure1D, MeasureError, QuadConfig, ShellProtocol, ShellResult,
};
use crate::RealFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Satisfied,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub condition: String,
    /// Integral or bound; `None` when not finite.
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub diagnostic: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub condition: String,
    pub status: Status,
    pub evidence: Vec<Evidence>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CriteriaError {
    #[error("spec is not in natural scale; apply natural_scale_form first")]
    NotNatural,
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriteriaOptions {
    /// Points per decade of the geometric sup grids.
    pub points_per_decade: usize,
    /// Bottom of the sup grids.
    pub eps_min: f64,
    /// Points per dyadic shell in the nested integral.
    pub points_per_octave: usize,
    /// Dyadic shells resolved explicitly in the nested integral.
    pub nested_shells: usize,
    pub shells: ShellProtocol,
}

impl Default for CriteriaOptions {
    fn default() -> Self {
        Self { points_per_decade: 64, eps_min: 1e-8, points_per_octave: 20, nested_shells: 64, shells: ShellProtocol::default() }
    }
}

impl CriteriaOptions {
    pub fn refined(&self) -> Self {
        Self { points_per_decade: 2 * self.points_per_decade, points_per_octave: 2 * self.points_per_octave, ..*self }
    }
}

/// Three-way reading of a shell result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reading {
    Finite,
    Infinite,
    Unknown,
}

fn read(r: &ShellResult) -> Reading {
    match r {
        ShellResult::Finite { .. } => Reading::Finite,
        ShellResult::Divergent { .. } => Reading::Infinite,
        ShellResult::Undetermined { .. } => Reading::Unknown,
    }
}

fn describe(r: &ShellResult) -> String {
    match r {
        ShellResult::Finite { error, shells, .. } => format!("finite ({shells} shells, error {error:.1e})"),
        ShellResult::Divergent { shells, .. } => format!("divergent ({shells} shells)"),
        ShellResult::Undetermined { shells, .. } => format!("undetermined ({shells} shells)"),
    }
}

fn ev_integral(name: &str, r: &ShellResult) -> Evidence {
    Evidence { condition: name.into(), value: r.value(), threshold: None, diagnostic: describe(r) }
}

fn integrate_or_unknown(mu: &Measure1D, f: &Integrand, a: f64, b: f64) -> ShellResult {
    mu.integrate(f, a, b).unwrap_or(ShellResult::Undetermined { partial: f64::NAN, shells: 0 })
}

/// `∫ f dμ` over `(a, b]` (the atom at `b` included).
fn closed_right(mu: &Measure1D, f: &Integrand, a: f64, b: f64) -> ShellResult {
    let mut r = integrate_or_unknown(mu, f, a, b);
    for at in mu.atoms() {
        if at.location == b {
            r = r.add(ShellResult::Finite { value: f.eval(b) * at.mass, error: 0.0, shells: 0 });
        }
    }
    r
}

fn atoms_in(mu: &Measure1D, a: f64, b: f64) -> Vec<f64> {
    mu.atoms().iter().filter(|at| at.location > a && at.location < b).map(|at| at.location).collect()
}

/// Running supremum of `f` from `eps` down to `eps_min`.
#[derive(Debug, Clone, Copy)]
struct SupProfile {
    sup: f64,
    /// `sup` changes by < 1% over the last two decades.
    stable: bool,
}

fn geometric_down(eps: f64, opts: &CriteriaOptions) -> Vec<f64> {
    let decades = crate::math::log10(eps / opts.eps_min);
    let n = libm::ceil(decades * opts.points_per_decade as f64) as usize;
    (0..=n).map(|k| eps * powf(10.0, -(k as f64) / opts.points_per_decade as f64)).collect()
}

fn sup_profile<F: Fn(f64) -> f64>(f: F, eps: f64, opts: &CriteriaOptions) -> SupProfile {
    let ys = geometric_down(eps, opts);
    let cut = opts.eps_min * 100.0;
    let mut sup = f64::NEG_INFINITY;
    let mut sup_at_cut = f64::NEG_INFINITY;
    for &y in &ys {
        let v = f(y);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        sup = sup.max(v);
        if y >= cut {
            sup_at_cut = sup;
        }
    }
    let stable = sup.is_finite() && (sup <= sup_at_cut.abs() * 1.01 || sup == sup_at_cut);
    SupProfile { sup, stable }
}

/// Running infimum, same stabilization rule.
fn inf_profile<F: Fn(f64) -> f64>(f: F, eps: f64, opts: &CriteriaOptions) -> SupProfile {
    let p = sup_profile(|y| -f(y), eps, opts);
    let inf = -p.sup;
    // Stable below means the infimum did not drop by more than 1%.
    let ys = geometric_down(eps, opts);
    let cut = opts.eps_min * 100.0;
    let inf_cut = ys.iter().filter(|&&y| y >= cut).map(|&y| f(y)).fold(f64::INFINITY, f64::min);
    SupProfile { sup: inf, stable: inf.is_finite() && inf >= 0.99 * inf_cut }
}

fn verdict(condition: &str, status: Status, evidence: Vec<Evidence>, notes: Vec<String>) -> Verdict {
    Verdict { condition: condition.into(), status, evidence, notes }
}

const BOUNDED_CUT: f64 = 1e-3;

/// `∫ x μ(dx)` over `(0, ∞)`. When quadrature cannot settle the piece near 0
/// (oscillating densities) but `x·dμ/dx` has a stable bound `B` there, the
/// piece on `(0, ε)` is replaced by `[0, Bε]`.
fn first_moment(mu: &Measure1D, opts: &CriteriaOptions) -> ShellResult {
    let r = integrate_or_unknown(mu, &Integrand::identity(), 0.0, f64::INFINITY);
    if read(&r) != Reading::Unknown || mu.density().is_none() || !atoms_in(mu, 0.0, BOUNDED_CUT).is_empty() {
        return r;
    }
    let p = sup_profile(|x| x * mu.density_at(x), BOUNDED_CUT, opts);
    if !p.stable {
        return r;
    }
    let bound = p.sup.max(0.0) * BOUNDED_CUT;
    let loose = IntegrationOptions { quad: QuadConfig { rel_tol: 1e-9, max_intervals: 20_000, ..QuadConfig::default() }, ..IntegrationOptions::default() };
    let mid = mu.integrate_with(&Integrand::identity(), BOUNDED_CUT, 1.0, &loose);
    let at_one: f64 = mu.atoms().iter().filter(|a| a.location == 1.0).map(|a| a.mass).sum();
    let mid = mid.unwrap_or(ShellResult::Undetermined { partial: f64::NAN, shells: 0 });
    let mid = mid.add(ShellResult::Finite { value: at_one, error: 0.0, shells: 0 });
    match mid.add(closed_right(mu, &Integrand::identity(), 1.0, f64::INFINITY)) {
        ShellResult::Finite { value, error, shells } => ShellResult::Finite { value: value + 0.5 * bound, error: error + 0.5 * bound, shells },
        other => other,
    }
}

/// First moments of `m` and `k`. Only the `m` part is treated as necessary:
/// its divergence is a violation, a divergent `k` part is merely
/// inconclusive.
fn moment_evidence(spec: &DiffusionSpec, with_killing: bool) -> (Reading, Vec<Evidence>) {
    let opts = CriteriaOptions::default();
    let mut ev = Vec::new();
    let rm = first_moment(&spec.speed, &opts);
    ev.push(ev_integral("∫ x m(dx)", &rm));
    let mut reading = read(&rm);
    if with_killing && !spec.killing.is_zero() {
        let rk = first_moment(&spec.killing, &opts);
        ev.push(ev_integral("∫ x k(dx)", &rk));
        reading = match (reading, read(&rk)) {
            (Reading::Infinite, _) => Reading::Infinite,
            (Reading::Finite, Reading::Finite) => Reading::Finite,
            _ => Reading::Unknown,
        };
    }
    (reading, ev)
}

/// The nested integral `∫₀¹ (1/x) sup_{y≤x} (1/y)∫_(0,y) z² m(dz) dx`.
fn nested_integral(m: &Measure1D, opts: &CriteriaOptions) -> (ShellResult, bool) {
    let nsh = opts.nested_shells;
    let z2 = Integrand::Power(2.0);
    // Inner dyadic shells (2^{-j-1}, 2^{-j}].
    let mut inner = Vec::new();
    let mut inner_tail = None;
    for j in 0..opts.shells.max_shells {
        let (a, b) = (libm::ldexp(1.0, -(j as i32) - 1), libm::ldexp(1.0, -(j as i32)));
        let r = closed_right(m, &z2, a, b);
        match r {
            ShellResult::Finite { value, .. } if value.is_finite() => inner.push(value),
            ShellResult::Finite { .. } | ShellResult::Divergent { .. } => {
                return (ShellResult::Divergent { partial: f64::INFINITY, shells: 0 }, true)
            }
            ShellResult::Undetermined { .. } => return (ShellResult::Undetermined { partial: f64::NAN, shells: 0 }, false),
        }
        if j + 1 >= nsh + 2 {
            match shell_decision(&inner, &opts.shells) {
                Some(Ok(t)) => {
                    inner_tail = Some(t);
                    break;
                }
                Some(Err(())) => return (ShellResult::Divergent { partial: f64::INFINITY, shells: 0 }, true),
                None => {}
            }
        }
    }
    let tail = match inner_tail {
        Some(t) => t,
        None => return (ShellResult::Undetermined { partial: f64::NAN, shells: 0 }, false),
    };
    // I(2^{-n}) by suffix sums, smallest first.
    let mut idyad = alloc::vec![0.0; inner.len() + 1];
    idyad[inner.len()] = tail;
    for j in (0..inner.len()).rev() {
        idyad[j] = idyad[j + 1] + inner[j];
    }
    // F on the grid of each outer shell n < nsh, bottom-up.
    let p = opts.points_per_octave;
    let mut f_by_shell: Vec<Vec<(f64, f64)>> = alloc::vec![Vec::new(); nsh];
    for n in (0..nsh).rev() {
        let lo = libm::ldexp(1.0, -(n as i32) - 1);
        let mut acc = idyad[n + 1];
        let mut prev = lo;
        let mut pts = Vec::with_capacity(p + 1);
        pts.push((lo, acc / lo));
        for k in 1..=p {
            let y = if k == p { 2.0 * lo } else { lo * exp(ln(2.0) * k as f64 / p as f64) };
            match closed_right(m, &z2, prev, y) {
                ShellResult::Finite { value, .. } => acc += value,
                _ => return (ShellResult::Undetermined { partial: f64::NAN, shells: 0 }, false),
            }
            pts.push((y, acc / y));
            prev = y;
        }
        f_by_shell[n] = pts;
    }
    // Running sup from the bottom, then outer shells by trapezoid in ln x.
    let mut g = 0.0f64;
    let mut outer_rev = Vec::with_capacity(nsh);
    let cut = opts.eps_min * 100.0;
    let (mut sup_all, mut sup_above_cut) = (0.0f64, 0.0f64);
    for n in (0..nsh).rev() {
        let pts = &f_by_shell[n];
        let mut s = 0.0;
        let mut g_prev = g.max(pts[0].1);
        for w in pts.windows(2) {
            let gn = g_prev.max(w[1].1);
            // G linear in x on the piece: ∫ G/x dx in closed form.
            let (x0, x1) = (w[0].0, w[1].0);
            let slope = (gn - g_prev) / (x1 - x0);
            s += (g_prev - slope * x0) * (ln(x1) - ln(x0)) + slope * (x1 - x0);
            g_prev = gn;
        }
        g = g_prev;
        outer_rev.push(s);
        for &(y, f) in pts {
            if y >= opts.eps_min {
                sup_all = sup_all.max(f);
                if y >= cut {
                    sup_above_cut = sup_above_cut.max(f);
                }
            }
        }
    }
    // sup over [eps_min, 1] should not exceed sup over [100·eps_min, 1] by 1%.
    let stable = sup_all <= 1.01 * sup_above_cut || sup_all == 0.0;
    outer_rev.reverse();
    let mut sums = Vec::new();
    for (n, &o) in outer_rev.iter().enumerate() {
        sums.push(o);
        match shell_decision(&sums, &opts.shells) {
            Some(Ok(t)) => {
                let v: f64 = sums.iter().sum::<f64>() + t;
                return (ShellResult::Finite { value: v, error: t, shells: n + 1 }, stable);
            }
            Some(Err(())) => return (ShellResult::Divergent { partial: sums.iter().sum(), shells: n + 1 }, stable),
            None => {}
        }
    }
    (ShellResult::Undetermined { partial: sums.iter().sum(), shells: sums.len() }, stable)
}

fn require_natural(spec: &DiffusionSpec) -> Result<(), CriteriaError> {
    if spec.is_natural() {
        Ok(())
    } else {
        Err(CriteriaError::NotNatural)
    }
}

fn matsumoto_parts(spec: &DiffusionSpec, opts: &CriteriaOptions) -> (Status, Vec<Evidence>, Vec<String>) {
    let (mom, mut ev) = moment_evidence(spec, false);
    let (nested, stable) = nested_integral(&spec.speed, opts);
    ev.push(ev_integral("∫₀¹ (1/x) sup_{y≤x} (1/y)∫_(0,y) z² m(dz) dx", &nested));
    ev.push(Evidence {
        condition: "sup of (1/y)∫ z² m(dz) settles near 0".into(),
        value: None,
        threshold: Some(0.01),
        diagnostic: if stable { "stable".into() } else { "still moving at the grid bottom".into() },
    });
    let mut notes = Vec::new();
    let status = match (mom, read(&nested)) {
        (Reading::Infinite, _) => Status::Violated,
        (_, Reading::Infinite) => Status::Violated,
        (Reading::Finite, Reading::Finite) if stable => Status::Satisfied,
        _ => {
            notes.push("an integral or the near-0 supremum is not conclusive".into());
            Status::Inconclusive
        }
    };
    (status, ev, notes)
}

/// Nested-integral route to the bound on continuous absorption, plus the
/// first moment of `m`.
pub fn check_matsumoto(spec: &DiffusionSpec) -> Result<Verdict, CriteriaError> {
    check_matsumoto_with(spec, &CriteriaOptions::default())
}

pub fn check_matsumoto_with(spec: &DiffusionSpec, opts: &CriteriaOptions) -> Result<Verdict, CriteriaError> {
    require_natural(spec)?;
    let (status, ev, notes) = matsumoto_parts(spec, opts);
    Ok(verdict("matsumoto", status, ev, notes))
}

const EPS_LADDER: [f64; 3] = [1.0, 0.1, 0.01];

/// `x · dk/dx` bounded near 0 (no atoms of `k` there).
fn inverse_density_route(spec: &DiffusionSpec, opts: &CriteriaOptions) -> (Reading, Evidence) {
    let k = &spec.killing;
    if k.density().is_none() && k.atoms().is_empty() {
        return (Reading::Finite, Evidence { condition: "x·dk/dx bounded near 0".into(), value: Some(0.0), threshold: None, diagnostic: "no killing".into() });
    }
    for &eps in EPS_LADDER.iter() {
        if !atoms_in(k, 0.0, eps).is_empty() {
            continue;
        }
        let p = sup_profile(|x| x * k.density_at(x), eps, opts);
        if p.stable {
            return (
                Reading::Finite,
                Evidence { condition: "x·dk/dx bounded near 0".into(), value: Some(p.sup), threshold: None, diagnostic: format!("stable sup on (0, {eps})") },
            );
        }
    }
    (Reading::Unknown, Evidence { condition: "x·dk/dx bounded near 0".into(), value: None, threshold: None, diagnostic: "sup not stable for any tested ε".into() })
}

/// `∫₁^∞ x k(dx) < ∞` and `k((0, 1]) < ∞`.
fn finite_killing_route(spec: &DiffusionSpec) -> (Reading, Vec<Evidence>) {
    let k = &spec.killing;
    let far = integrate_or_unknown(k, &Integrand::identity(), 1.0, f64::INFINITY);
    let near = closed_right(k, &Integrand::one(), 0.0, 1.0);
    let r = match (read(&far), read(&near)) {
        (Reading::Finite, Reading::Finite) => Reading::Finite,
        (Reading::Infinite, _) | (_, Reading::Infinite) => Reading::Infinite,
        _ => Reading::Unknown,
    };
    (r, alloc::vec![ev_integral("∫₁^∞ x k(dx)", &far), ev_integral("k((0,1])", &near)])
}

/// Condition (C): moment, nested-integral route, and one of the two
/// killing routes.
pub fn check_condition_c(spec: &DiffusionSpec) -> Result<Verdict, CriteriaError> {
    check_condition_c_with(spec, &CriteriaOptions::default())
}

pub fn check_condition_c_with(spec: &DiffusionSpec, opts: &CriteriaOptions) -> Result<Verdict, CriteriaError> {
    require_natural(spec)?;
    let (mom, mut ev) = moment_evidence(spec, true);
    let (mats, mev, _) = matsumoto_parts(spec, opts);
    ev.extend(mev.into_iter().skip(1));
    let (r35, e35) = inverse_density_route(spec, opts);
    ev.push(e35);
    let (r36, e36) = finite_killing_route(spec);
    ev.extend(e36);
    let mut notes = Vec::new();
    let killing_ok = r35 == Reading::Finite || r36 == Reading::Finite;
    if r35 == Reading::Finite {
        notes.push("killing bound via x·dk/dx".into());
    } else if r36 == Reading::Finite {
        notes.push("killing bound via finite killing mass near 0".into());
    }
    let status = if mom == Reading::Infinite {
        notes.push("first moment of m diverges".into());
        Status::Violated
    } else if mom == Reading::Finite && mats == Status::Satisfied && killing_ok {
        Status::Satisfied
    } else {
        if !killing_ok {
            notes.push("neither killing route is conclusive".into());
        }
        Status::Inconclusive
    };
    Ok(verdict("condition_c", status, ev, notes))
}

/// Condition (C'): moment, nested-integral route, bounded `dk/dm` near 0.
pub fn check_condition_cprime(spec: &DiffusionSpec) -> Result<Verdict, CriteriaError> {
    check_condition_cprime_with(spec, &CriteriaOptions::default())
}

fn ratio_route(spec: &DiffusionSpec, opts: &CriteriaOptions, name: &str) -> (Reading, Vec<Evidence>) {
    let (k, m) = (&spec.killing, &spec.speed);
    let mut ev = Vec::new();
    let mut any_bounded = false;
    let mut all_unbounded = true;
    for &eps in EPS_LADDER.iter() {
        let bad_atom = atoms_in(k, 0.0, eps).into_iter().find(|&a| !m.atoms().iter().any(|b| b.location == a));
        if let Some(a) = bad_atom {
            ev.push(Evidence { condition: format!("{name} on (0, {eps})"), value: None, threshold: None, diagnostic: format!("killing atom at {a} without speed atom") });
            continue;
        }
        let p = sup_profile(|x| spec.kill_rate_at(x), eps, opts);
        let atom_ratio = k
            .atoms()
            .iter()
            .filter(|a| a.location < eps)
            .filter_map(|a| m.atoms().iter().find(|b| b.location == a.location).map(|b| a.mass / b.mass))
            .fold(0.0, f64::max);
        if p.stable {
            any_bounded = true;
            all_unbounded = false;
            ev.push(Evidence { condition: format!("{name} on (0, {eps})"), value: Some(p.sup.max(atom_ratio)), threshold: None, diagnostic: "stable".into() });
            break;
        }
        if p.sup.is_finite() {
            all_unbounded = all_unbounded && p.sup > 0.0;
        }
        ev.push(Evidence { condition: format!("{name} on (0, {eps})"), value: None, threshold: None, diagnostic: "sup grows towards 0".into() });
    }
    let r = if any_bounded {
        Reading::Finite
    } else if all_unbounded {
        Reading::Infinite
    } else {
        Reading::Unknown
    };
    (r, ev)
}

pub fn check_condition_cprime_with(spec: &DiffusionSpec, opts: &CriteriaOptions) -> Result<Verdict, CriteriaError> {
    require_natural(spec)?;
    let (mom, mut ev) = moment_evidence(spec, true);
    let (mats, mev, _) = matsumoto_parts(spec, opts);
    ev.extend(mev.into_iter().skip(1));
    let (ratio, rev) = ratio_route(spec, opts, "sup dk/dm");
    ev.extend(rev);
    let mut notes = Vec::new();
    let status = match (mom, ratio) {
        (Reading::Infinite, _) => {
            notes.push("first moment of m diverges".into());
            Status::Violated
        }
        (_, Reading::Infinite) => {
            notes.push("dk/dm unbounded near 0 for every tested ε".into());
            Status::Violated
        }
        (Reading::Finite, Reading::Finite) if mats == Status::Satisfied => Status::Satisfied,
        _ => Status::Inconclusive,
    };
    Ok(verdict("condition_c_prime", status, ev, notes))
}

/// Condition (D) for a spec in original coordinates: moments and the
/// nested integral of the natural-scale image, then the killing routes
/// (i) finite killing mass near 0, (ii) `dk/dy ≤ C/s` with `s` Lipschitz
/// below, (iii) bounded killing rate.
pub fn check_condition_d(spec: &DiffusionSpec) -> Result<Verdict, CriteriaError> {
    check_condition_d_with(spec, &CriteriaOptions::default())
}

pub fn check_condition_d_with(spec: &DiffusionSpec, opts: &CriteriaOptions) -> Result<Verdict, CriteriaError> {
    let nat = natural_scale_form(spec)?;
    let (mom, mut ev) = moment_evidence(&nat, true);
    if let Some(e) = ev.get_mut(0) {
        e.condition = "∫ s(y) m(dy)".into();
    }
    if let Some(e) = ev.get_mut(1) {
        e.condition = "∫ s(y) k(dy)".into();
    }
    let (mats, mev, _) = matsumoto_parts(&nat, opts);
    ev.extend(mev.into_iter().skip(1));
    let mut notes = Vec::new();
    let k = &spec.killing;
    let s = &spec.scale;

    // (i)
    let near = closed_right(k, &Integrand::one(), 0.0, 1.0);
    ev.push(ev_integral("(i) k((0,1])", &near));
    let route_i = read(&near) == Reading::Finite;

    // (ii)
    let mut route_ii = false;
    if !route_i {
        for &eps in EPS_LADDER.iter() {
            if !atoms_in(k, 0.0, eps).is_empty() {
                continue;
            }
            let bound = sup_profile(|y| s.value(y) * k.density_at(y), eps, opts);
            let lip = inf_profile(|y| crate::math::exp(s.ln_derivative(y)), eps, opts);
            let ok = bound.stable && lip.stable && lip.sup > 0.0;
            ev.push(Evidence {
                condition: format!("(ii) s·dk/dy bounded and s′ ≥ ρ > 0 on (0, {eps})"),
                value: if ok { Some(bound.sup) } else { None },
                threshold: None,
                diagnostic: format!("bound {}, ρ ≈ {:.3e} {}", if bound.stable { "stable" } else { "unstable" }, lip.sup, if lip.stable { "stable" } else { "→ 0" }),
            });
            if ok {
                route_ii = true;
                break;
            }
        }
    }

    // (iii)
    let mut route_iii = false;
    if !route_i && !route_ii {
        let (r, rev) = ratio_route(spec, opts, "(iii) sup κ");
        ev.extend(rev);
        route_iii = r == Reading::Finite;
    }
    let route = if route_i {
        Some("(i)")
    } else if route_ii {
        Some("(ii)")
    } else if route_iii {
        Some("(iii)")
    } else {
        None
    };
    if let Some(r) = route {
        notes.push(format!("killing handled by route {r}"));
    }
    let status = if mom == Reading::Infinite {
        notes.push("∫ s m diverges".into());
        Status::Violated
    } else if mom == Reading::Finite && mats == Status::Satisfied && route.is_some() {
        Status::Satisfied
    } else {
        Status::Inconclusive
    };
    Ok(verdict("condition_d", status, ev, notes))
}

const BM_BETAS: [f64; 6] = [3.0, 2.0, 1.5, 1.25, 1.1, 1.05];
const BETAS: [f64; 7] = [3.0, 2.0, 1.5, 1.0, 0.5, 0.25, 0.1];

/// Largest tested `β` with `q(y)/y^β > 0` on `[y0, 1e8]` and no decay
/// of the ratio between `1e6` and `1e8`.
fn dominance_exponent<F: Fn(f64) -> f64>(q: F, candidates: &[f64], opts: &CriteriaOptions) -> Option<(f64, f64)> {
    let y0 = 10.0;
    let n = 7 * opts.points_per_decade;
    let ys: Vec<f64> = (0..=n).map(|k| y0 * powf(10.0, k as f64 / opts.points_per_decade as f64)).collect();
    for &beta in candidates {
        let r = |y: f64| q(y) / powf(y, beta);
        if ys.iter().all(|&y| r(y) > 0.0) && r(1e8) / r(1e6) > 0.9 {
            let c = ys.iter().map(|&y| r(y)).fold(f64::INFINITY, f64::min);
            return Some((beta, c));
        }
    }
    None
}

fn candidates(hint: Option<f64>, allowed: impl Fn(f64) -> bool) -> Vec<f64> {
    let mut v: Vec<f64> = hint.into_iter().chain(BETAS.iter().cloned()).filter(|&b| allowed(b)).collect();
    v.dedup();
    v
}

fn rate_integral(kappa: &RealFn, weight: impl Fn(f64) -> f64 + Send + Sync + 'static, a: f64, b: f64) -> ShellResult {
    let k = kappa.clone();
    let mu = Measure1D::from_density(crate::real_fn(move |y| k(y) * weight(y)));
    integrate_or_unknown(&mu, &Integrand::one(), a, b)
}

/// `dY = √Y dB + Y h(Y) dt` with killing rate `κ`: `h ≤ −C y^β` for large
/// `y`, `∫₁^∞ κ/y^{1+β} < ∞`, and `∫₀¹ κ/y < ∞` or `limsup_{0} κ < ∞`.
pub fn check_logistic_model(h: &RealFn, kappa: &RealFn, beta_hint: Option<f64>) -> Verdict {
    check_logistic_model_with(h, kappa, beta_hint, &CriteriaOptions::default())
}

pub fn check_logistic_model_with(h: &RealFn, kappa: &RealFn, beta_hint: Option<f64>, opts: &CriteriaOptions) -> Verdict {
    let hh = h.clone();
    let dom = dominance_exponent(move |y| -hh(y), &candidates(beta_hint, |b| b > 0.0), opts);
    let mut ev = Vec::new();
    let mut notes = Vec::new();
    let (beta, c) = match dom {
        Some(bc) => bc,
        None => {
            ev.push(Evidence { condition: "h(y) ≤ −C y^β, β > 0".into(), value: None, threshold: None, diagnostic: "no tested β works".into() });
            return verdict("logistic_model", Status::Inconclusive, ev, alloc::vec!["drift dominance not detected".into()]);
        }
    };
    ev.push(Evidence { condition: "h(y) ≤ −C y^β".into(), value: Some(c), threshold: Some(0.0), diagnostic: format!("β = {beta}") });
    let far = rate_integral(kappa, move |y| 1.0 / powf(y, 1.0 + beta), 1.0, f64::INFINITY);
    ev.push(ev_integral("∫₁^∞ κ(y)/y^{1+β} dy", &far));
    let near = rate_integral(kappa, |y| 1.0 / y, 0.0, 1.0);
    ev.push(ev_integral("∫₀¹ κ(y)/y dy", &near));
    let k2 = kappa.clone();
    let sup = sup_profile(move |y| k2(y), 1.0, opts);
    ev.push(Evidence {
        condition: "limsup_{y→0} κ(y) < ∞".into(),
        value: if sup.stable { Some(sup.sup) } else { None },
        threshold: None,
        diagnostic: if sup.stable { "stable".into() } else { "sup grows towards 0".into() },
    });
    let near_ok = read(&near) == Reading::Finite || sup.stable;
    let status = match read(&far) {
        Reading::Finite if near_ok => {
            notes.push(if read(&near) == Reading::Finite { "near-0 killing via ∫κ/y".into() } else { "near-0 killing via bounded κ".into() });
            Status::Satisfied
        }
        _ => Status::Inconclusive,
    };
    verdict("logistic_model", status, ev, notes)
}

/// `dY = dB − h(Y) dt` with killing rate `κ`: `h ≥ C y^β` for large `y` with
/// `β > 1`, `∫₀¹ κ < ∞` and `∫₁^∞ κ/y^β < ∞`.
pub fn check_drifted_bm(h: &RealFn, kappa: &RealFn) -> Verdict {
    check_drifted_bm_with(h, kappa, &CriteriaOptions::default())
}

pub fn check_drifted_bm_with(h: &RealFn, kappa: &RealFn, opts: &CriteriaOptions) -> Verdict {
    let hh = h.clone();
    let dom = dominance_exponent(move |y| hh(y), &BM_BETAS, opts);
    let mut ev = Vec::new();
    let (beta, c) = match dom {
        Some(bc) => bc,
        None => {
            ev.push(Evidence { condition: "h(y) ≥ C y^β, β > 1".into(), value: None, threshold: None, diagnostic: "no tested β > 1 works".into() });
            return verdict("drifted_bm", Status::Inconclusive, ev, alloc::vec!["drift dominance with β > 1 not detected".into()]);
        }
    };
    ev.push(Evidence { condition: "h(y) ≥ C y^β".into(), value: Some(c), threshold: Some(0.0), diagnostic: format!("β = {beta}") });
    let near = rate_integral(kappa, |_| 1.0, 0.0, 1.0);
    ev.push(ev_integral("∫₀¹ κ(y) dy", &near));
    let far = rate_integral(kappa, move |y| 1.0 / powf(y, beta), 1.0, f64::INFINITY);
    ev.push(ev_integral("∫₁^∞ κ(y)/y^β dy", &far));
    let status = if read(&near) == Reading::Finite && read(&far) == Reading::Finite { Status::Satisfied } else { Status::Inconclusive };
    verdict("drifted_bm", status, ev, Vec::new())
}

#[cfg(test)]
mod tests;
