//! Scale functions: identity, explicit closures, and the scale generated by
//! a drift-to-variance ratio `g = b/σ²`, `s(y) = ∫₀ʸ exp(−2∫₀ᵘ g) du`.
//!
//! The drift-generated scale is stored through `I(y) = ∫₀ʸ g` and
//! `R(y) = s(y)/s′(y)` on a cached grid. Both stay representable when `s`
//! itself overflows (logistic drifts make `s` grow like `exp(y²)`), and
//! `ln s = ln R − 2I` keeps full relative precision.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use super::quadrature::{adaptive, gk15, QuadConfig, QuadError};
use super::MeasureError;
use crate::math::{abs, exp, ln, ln_add_exp};
use crate::RealFn;

/// Strictly increasing `s: [0,∞) → [0,∞)` with `s(0) = 0`.
#[derive(Clone)]
pub struct ScaleFunction {
    inner: Arc<Kind>,
}

enum Kind {
    Identity,
    Explicit { label: String, forward: RealFn, derivative: Option<RealFn>, inverse: Option<RealFn> },
    Drift(DriftScale),
}

impl fmt::Debug for ScaleFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl ScaleFunction {
    pub fn identity() -> Self {
        Self { inner: Arc::new(Kind::Identity) }
    }

    /// Closure-backed scale. Without `inverse` the inverse is found by a
    /// bracketed Newton search; without `derivative` a central difference
    /// is used.
    pub fn explicit(label: &str, forward: RealFn, derivative: Option<RealFn>, inverse: Option<RealFn>) -> Self {
        Self { inner: Arc::new(Kind::Explicit { label: label.into(), forward, derivative, inverse }) }
    }

    pub fn describe(&self) -> String {
        match &*self.inner {
            Kind::Identity => "identity".into(),
            Kind::Explicit { label, .. } => alloc::format!("explicit({label})"),
            Kind::Drift(_) => "from_drift".into(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(&*self.inner, Kind::Identity)
    }

    /// Same underlying object (cheap pointer test).
    pub fn same_as(&self, other: &ScaleFunction) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || (self.is_identity() && other.is_identity())
    }

    /// Largest argument the scale can evaluate.
    pub fn domain_limit(&self) -> f64 {
        match &*self.inner {
            Kind::Drift(d) => d.limit(),
            _ => f64::INFINITY,
        }
    }

    /// `s(y)`; may be `+∞` when the value overflows.
    pub fn value(&self, y: f64) -> f64 {
        match &*self.inner {
            Kind::Identity => y,
            Kind::Explicit { forward, .. } => forward(y),
            Kind::Drift(_) => {
                if y <= 0.0 {
                    0.0
                } else {
                    exp(self.ln_value(y))
                }
            }
        }
    }

    pub fn ln_value(&self, y: f64) -> f64 {
        match &*self.inner {
            Kind::Drift(d) => d.ln_s(y),
            _ => ln(self.value(y)),
        }
    }

    /// `s′(y)`.
    pub fn derivative(&self, y: f64) -> f64 {
        match &*self.inner {
            Kind::Identity => 1.0,
            Kind::Explicit { forward, derivative, .. } => match derivative {
                Some(d) => d(y),
                None => {
                    let h = 1e-6 * y.max(1e-6);
                    let lo = (y - h).max(0.0);
                    (forward(y + h) - forward(lo)) / (y + h - lo)
                }
            },
            Kind::Drift(d) => exp(-2.0 * d.integral(y)),
        }
    }

    pub fn ln_derivative(&self, y: f64) -> f64 {
        match &*self.inner {
            Kind::Drift(d) => -2.0 * d.integral(y),
            _ => ln(self.derivative(y)),
        }
    }

    /// `ln(s(y)/s′(y))`, computed without forming `s`.
    pub fn ln_ratio(&self, y: f64) -> f64 {
        match &*self.inner {
            Kind::Drift(d) => d.ln_ratio(y),
            _ => ln(self.value(y)) - ln(self.derivative(y)),
        }
    }

    /// `s⁻¹(x)`.
    pub fn inverse(&self, x: f64) -> Result<f64, MeasureError> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        if !x.is_finite() {
            return Err(MeasureError::NotInvertible { at: x });
        }
        match &*self.inner {
            Kind::Identity => Ok(x),
            Kind::Explicit { forward, derivative, inverse, .. } => {
                if let Some(inv) = inverse {
                    return Ok(inv(x));
                }
                let df = |y: f64| match derivative {
                    Some(d) => d(y),
                    None => self.derivative(y),
                };
                invert_monotone(|y| forward(y), df, x, 0.0, None)
            }
            Kind::Drift(d) => d.inverse(x),
        }
    }

    /// `s⁻¹` given `ln x`, usable when `x` itself overflows.
    pub fn inverse_ln(&self, lnx: f64) -> Result<f64, MeasureError> {
        match &*self.inner {
            Kind::Drift(d) => d.inverse_ln(lnx),
            _ => self.inverse(exp(lnx)),
        }
    }
}

/// Safeguarded Newton/bisection for increasing `f` with `f(lo) ≤ x`.
fn invert_monotone<F, D>(f: F, df: D, x: f64, lo: f64, hi: Option<f64>) -> Result<f64, MeasureError>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut lo = lo;
    let mut hi = match hi {
        Some(h) => h,
        None => {
            let mut h = 1.0f64.max(lo * 2.0);
            let mut k = 0;
            while !(f(h) >= x) {
                lo = h;
                h *= 2.0;
                k += 1;
                if k > 2000 || !h.is_finite() {
                    return Err(MeasureError::NotInvertible { at: x });
                }
            }
            h
        }
    };
    let mut y = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fy = f(y) - x;
        if fy == 0.0 {
            return Ok(y);
        }
        if fy > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
        let d = df(y);
        let newton = y - fy / d;
        y = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if abs(fy) <= 1e-15 * abs(x) {
            return Ok(y);
        }
    }
    Ok(y)
}

struct DriftScale {
    g: RealFn,
    y: Vec<f64>,
    i: Vec<f64>,
    ln_r: Vec<f64>,
    tail: Tail,
}

/// Closed-form continuation of `R` beyond the last cached node.
#[derive(Clone, Copy)]
enum Tail {
    /// No continuation: the domain ends at the last node.
    None,
    /// `g < 0` and slowly varying on its own scale: `R ≈ −(1 − R₀′)/(2g)`
    /// with `R₀ = −1/(2g)`.
    Stiff,
    /// `s` has saturated at `s(∞)`: `ln R = ln s(∞) + 2I`.
    Saturated { ln_s_inf: f64 },
}

const UNIFORM_STEP: f64 = 1.0 / 256.0;
const UNIFORM_END: f64 = 32.0;
const PER_OCTAVE: usize = 128;
const DOMAIN_END: f64 = 1.152_921_504_606_847e18; // 2^60
const STIFF_TOL: f64 = 1e-6;

impl DriftScale {
    fn build(g: RealFn) -> Result<Self, MeasureError> {
        let mut nodes = Vec::new();
        let n_uniform = (UNIFORM_END / UNIFORM_STEP) as usize;
        for j in 0..=n_uniform {
            nodes.push(j as f64 * UNIFORM_STEP);
        }
        let ratio = exp(core::f64::consts::LN_2 / PER_OCTAVE as f64);
        let mut v = UNIFORM_END;
        while v < DOMAIN_END {
            v *= ratio;
            nodes.push(v);
        }
        let cfg = QuadConfig { rel_tol: 1e-13, max_intervals: 200, ..QuadConfig::default() };
        let mut out = DriftScale { g, y: Vec::new(), i: Vec::new(), ln_r: Vec::new(), tail: Tail::None };
        out.y.push(0.0);
        out.i.push(0.0);
        out.ln_r.push(f64::NEG_INFINITY);
        for j in 0..nodes.len() - 1 {
            let (a, b) = (nodes[j], nodes[j + 1]);
            if a >= UNIFORM_END {
                if let Some(t) = out.tail_at(a) {
                    out.tail = t;
                    break;
                }
            }
            let gi = &out.g;
            let fail = |at: f64| -> Result<(), MeasureError> {
                if at <= UNIFORM_END {
                    Err(MeasureError::DriftNotIntegrable { at })
                } else {
                    Ok(())
                }
            };
            let di = match adaptive(&|u: f64| gi(u), a, b, &cfg) {
                Ok((v, _)) if v.is_finite() => v,
                _ => {
                    fail(b)?;
                    break;
                }
            };
            let ib = out.i[j] + di;
            let ln_r = out.ln_cell_integral(a, b, di).map(|q| ln_add_exp(2.0 * di + out.ln_r[j], q));
            match ln_r {
                Some(l) if l.is_finite() && abs(2.0 * ib) < 1e290 => {
                    out.y.push(b);
                    out.i.push(ib);
                    out.ln_r.push(l);
                }
                _ => {
                    fail(b)?;
                    break;
                }
            }
        }
        Ok(out)
    }

    /// Decide whether the continuation can take over at node `a` (the last
    /// cached node).
    fn tail_at(&self, a: f64) -> Option<Tail> {
        let j = self.y.len() - 1;
        let ga = (self.g)(a);
        if ga < 0.0 {
            let (d1, d2) = derivatives(&self.g, a);
            if abs(d1) / (ga * ga) < STIFF_TOL && abs(d2) / abs(ga * ga * ga) < STIFF_TOL {
                return Some(Tail::Stiff);
            }
        }
        if j >= 2 {
            let ln_s = self.ln_s_node(j);
            let prev = self.ln_s_node(j - 1);
            if ga > 0.0 && ln_s - prev < 1e-16 * abs(ln_s).max(1.0) && 2.0 * self.i[j] > 80.0 {
                return Some(Tail::Saturated { ln_s_inf: ln_s });
            }
        }
        None
    }

    fn last(&self) -> f64 {
        *self.y.last().unwrap()
    }

    fn limit(&self) -> f64 {
        match self.tail {
            Tail::None => self.last(),
            _ => DOMAIN_END,
        }
    }

    fn cell(&self, y: f64) -> usize {
        match self.y.binary_search_by(|p| p.partial_cmp(&y).unwrap()) {
            Ok(j) => j.min(self.y.len() - 2),
            Err(j) => j.saturating_sub(1).min(self.y.len() - 2),
        }
    }

    /// `∫ₐᵘ g` by one Kronrod panel.
    fn partial(&self, a: f64, u: f64) -> f64 {
        if u == a {
            return 0.0;
        }
        let g = &self.g;
        match gk15(&|v: f64| g(v), a, u) {
            Ok((v, _)) => v,
            Err(_) => f64::NAN,
        }
    }

    /// `∫_{from}^{y} g`; adaptive when the span is wide.
    fn offset(&self, from: f64, y: f64) -> f64 {
        if y - from > 1.0 {
            let g = &self.g;
            let cfg = QuadConfig { rel_tol: 1e-13, max_intervals: 400, ..QuadConfig::default() };
            return match adaptive(&|v: f64| g(v), from, y, &cfg) {
                Ok((v, _)) => v,
                Err(QuadError::NotConverged { value, error }) if error <= 1e-10 * abs(value) => value,
                Err(_) => f64::NAN,
            };
        }
        self.partial(from, y)
    }

    fn integral(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y > self.limit() {
            return f64::NAN;
        }
        if y > self.last() {
            return self.i[self.y.len() - 1] + self.offset(self.last(), y);
        }
        let j = self.cell(y);
        self.i[j] + self.offset(self.y[j], y)
    }

    /// `ln ∫ₐᵇ exp(2(I(b) − I(u))) du` given `delta = I(b) − I(a)`.
    ///
    /// In stiff cells the integrand is a boundary layer at one end; the
    /// interval is cut geometrically towards that end first so the layer
    /// cannot fall between Kronrod nodes.
    fn ln_cell_integral(&self, a: f64, b: f64, delta: f64) -> Option<f64> {
        let shift = (2.0 * delta).max(0.0);
        let cfg = QuadConfig { rel_tol: 1e-11, max_intervals: 400, ..QuadConfig::default() };
        let f = |u: f64| exp(2.0 * self.partial(u, b) - shift);
        // Accept a result stuck at the roundoff floor.
        let loose = |r: Result<(f64, f64), QuadError>, scale: f64| match r {
            Ok((v, _)) => Some(v),
            Err(QuadError::NotConverged { value, error }) if error <= 1e-8 * value.max(scale) => Some(value),
            Err(_) => None,
        };
        let w = b - a;
        let peak_at_b = delta <= 0.0;
        let g_end = if peak_at_b { (self.g)(b) } else { (self.g)(a) };
        let stiffness = 2.0 * abs(g_end) * w;
        let mut total = 0.0;
        if !(stiffness > 50.0) {
            total = loose(adaptive(&f, a, b, &cfg), 0.0)?;
        } else {
            let levels = (libm::log2(stiffness) as usize + 8).min(1000);
            // The whole integral is about 1/(2|g|): use that as absolute scale.
            let scale = 1.0 / (2.0 * abs(g_end));
            let cfg = QuadConfig { abs_tol: 1e-12 * scale, ..cfg };
            let mut far = w;
            for _ in 0..levels {
                let near = 0.5 * far;
                let (lo, hi) = if peak_at_b { (b - far, b - near) } else { (a + near, a + far) };
                total += loose(adaptive(&f, lo, hi, &cfg), scale)?;
                far = near;
            }
            let (lo, hi) = if peak_at_b { (b - far, b) } else { (a, a + far) };
            total += loose(adaptive(&f, lo, hi, &cfg), scale)?;
        }
        if total > 0.0 {
            Some(shift + ln(total))
        } else {
            None
        }
    }

    fn ln_ratio(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if y > self.limit() {
            return f64::NAN;
        }
        if y > self.last() {
            return match self.tail {
                Tail::Stiff => {
                    let gy = (self.g)(y);
                    let (d1, _) = derivatives(&self.g, y);
                    ln(-(1.0 - d1 / (2.0 * gy * gy)) / (2.0 * gy))
                }
                Tail::Saturated { ln_s_inf } => ln_s_inf + 2.0 * self.integral(y),
                Tail::None => f64::NAN,
            };
        }
        let j = self.cell(y);
        if y == self.y[j] {
            return self.ln_r[j];
        }
        let delta = self.offset(self.y[j], y);
        match self.ln_cell_integral(self.y[j], y, delta) {
            Some(q) => ln_add_exp(2.0 * delta + self.ln_r[j], q),
            None => f64::NAN,
        }
    }

    fn ln_s_node(&self, j: usize) -> f64 {
        self.ln_r[j] - 2.0 * self.i[j]
    }

    fn ln_s(&self, y: f64) -> f64 {
        self.ln_ratio(y) - 2.0 * self.integral(y)
    }

    fn inverse(&self, x: f64) -> Result<f64, MeasureError> {
        self.inverse_ln(ln(x))
    }

    fn inverse_ln(&self, lnx: f64) -> Result<f64, MeasureError> {
        let n = self.y.len();
        let (mut a, mut b);
        if lnx > self.ln_s_node(n - 1) {
            // Beyond the cache: bracket by doubling inside the tail.
            let top = self.ln_s(self.limit());
            if !(lnx <= top) {
                return Err(MeasureError::NotInvertible { at: exp(lnx) });
            }
            a = self.last();
            b = 2.0 * a;
            while self.ln_s(b.min(self.limit())) < lnx {
                a = b;
                b *= 2.0;
            }
            b = b.min(self.limit());
        } else {
            let (mut lo, mut hi) = (0usize, n - 1);
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if self.ln_s_node(mid) < lnx {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            a = self.y[lo];
            b = self.y[hi];
        }
        let first = a == 0.0;
        let f = |y: f64| self.ln_s(y);
        // d ln s / dy = 1/R.
        let df = |y: f64| exp(-self.ln_ratio(y));
        let mut y = if first { exp(lnx).min(b).max(0.5 * b * f64::EPSILON) } else { 0.5 * (a + b) };
        for _ in 0..200 {
            let fy = f(y) - lnx;
            if !fy.is_finite() {
                y = 0.5 * (a + b);
                continue;
            }
            if abs(fy) <= 1e-15 * abs(lnx).max(1.0) {
                return Ok(y);
            }
            if fy > 0.0 {
                b = y;
            } else {
                a = y;
            }
            if b - a <= 4.0 * f64::EPSILON * b {
                return Ok(y);
            }
            let newton = y - fy / df(y);
            y = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
        }
        Ok(y)
    }
}

/// Central differences `(g′, g″)` at `y`.
fn derivatives(g: &RealFn, y: f64) -> (f64, f64) {
    let h = 1e-4 * y.max(1e-3);
    let (gm, g0, gp) = (g(y - h), g(y), g(y + h));
    ((gp - gm) / (2.0 * h), (gp - 2.0 * g0 + gm) / (h * h))
}

/// Scale generated by `g = b/σ²`: `s′ = exp(−2∫₀ʸ g)`.
///
/// Errors with "drift not locally integrable" when `∫g` is non-finite at a
/// finite point of the cached range.
pub fn scale_from_drift(g: RealFn) -> Result<ScaleFunction, MeasureError> {
    let d = DriftScale::build(g)?;
    Ok(ScaleFunction { inner: Arc::new(Kind::Drift(d)) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real_fn;

    #[test]
    fn zero_drift_gives_identity() {
        let s = scale_from_drift(real_fn(|_| 0.0)).unwrap();
        for &y in &[1e-6, 0.3, 1.0, 7.5, 100.0] {
            assert!((s.value(y) - y).abs() < 1e-12 * y, "{y}");
        }
    }

    #[test]
    fn constant_drift_closed_form() {
        let c = 0.7;
        let s = scale_from_drift(real_fn(move |_| c)).unwrap();
        for &y in &[0.01, 0.5, 2.0, 9.0] {
            let exact = (1.0 - libm::exp(-2.0 * c * y)) / (2.0 * c);
            assert!((s.value(y) - exact).abs() < 1e-12, "{y}");
        }
    }

    #[test]
    fn inverse_round_trip() {
        let s = scale_from_drift(real_fn(|y| 1.0 - y)).unwrap();
        for &x in &[1e-7, 1e-3, 0.4, 1.0, 3.0, 1e3, 1e30] {
            let y = s.inverse(x).unwrap();
            assert!((s.value(y) / x - 1.0).abs() < 1e-10, "{x} {y}");
        }
    }

    #[test]
    fn ratio_is_stable_where_s_overflows() {
        let s = scale_from_drift(real_fn(|y| 1.0 - y)).unwrap();
        // s/s′ → 1/(2(y−1)) for large y.
        let y = 60.0;
        let r = libm::exp(s.ln_ratio(y));
        assert!(s.value(y).is_infinite());
        assert!((r * 2.0 * (y - 1.0) - 1.0).abs() < 1e-3, "{r}");
    }

    #[test]
    fn nonintegrable_drift_is_rejected() {
        let r = scale_from_drift(real_fn(|y| 1.0 / (y - 0.5)));
        assert!(matches!(r, Err(MeasureError::DriftNotIntegrable { .. })));
    }
}
