//! Adaptive Gauss–Kronrod quadrature and the dyadic-shell test for
//! improper integrals.

use alloc::vec::Vec;
use serde::Serialize;

/// Tolerances for [`adaptive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-300, rel_tol: 1e-11, max_intervals: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum QuadError {
    #[error("integrand singular in interior (non-finite value at {at})")]
    NonFinite { at: f64 },
    #[error("quadrature did not reach tolerance (estimate {value}, error {error})")]
    NotConverged { value: f64, error: f64 },
}

// Kronrod nodes on [-1, 1] (non-negative half), 15-point rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss 7-point weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7–K15 panel on `[a, b]`: `(kronrod estimate, |kronrod − gauss|)`.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let eval = |x: f64| -> Result<f64, QuadError> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite { at: x })
        }
    };
    let fc = eval(c)?;
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = eval(c - dx)? + eval(c + dx)?;
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Ok((k * h, crate::math::abs((k - g) * h)))
}

/// Globally adaptive bisection on `[a, b]` (finite, `a < b`).
///
/// Returns `(value, error estimate)`. Panels are always split in the same
/// order, so the result is a deterministic function of `f`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, cfg: &QuadConfig) -> Result<(f64, f64), QuadError> {
    if !(b > a) {
        return Ok((0.0, 0.0));
    }
    let (v, e) = gk15(f, a, b)?;
    let mut panels: Vec<(f64, f64, f64, f64)> = alloc::vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    loop {
        let tol = cfg.abs_tol.max(cfg.rel_tol * crate::math::abs(total));
        if err <= tol {
            return Ok((total, err));
        }
        if panels.len() >= cfg.max_intervals {
            return Err(QuadError::NotConverged { value: total, error: err });
        }
        // Split the panel with the largest error (first one on ties).
        let mut worst = 0;
        for (i, p) in panels.iter().enumerate() {
            if p.3 > panels[worst].3 {
                worst = i;
            }
        }
        let (pa, pb, pv, pe) = panels[worst];
        let mid = 0.5 * (pa + pb);
        if !(mid > pa && mid < pb) {
            return Err(QuadError::NotConverged { value: total, error: err });
        }
        let (lv, le) = gk15(f, pa, mid)?;
        let (rv, re) = gk15(f, mid, pb)?;
        panels[worst] = (pa, mid, lv, le);
        panels.push((mid, pb, rv, re));
        total += lv + rv - pv;
        err += le + re - pe;
        if err < 0.0 {
            err = panels.iter().map(|p| p.3).sum();
        }
    }
}

/// Outcome of an improper integral under the dyadic-shell protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShellResult {
    Finite { value: f64, error: f64, shells: usize },
    Divergent { partial: f64, shells: usize },
    Undetermined { partial: f64, shells: usize },
}

impl ShellResult {
    pub fn value(&self) -> Option<f64> {
        match self {
            ShellResult::Finite { value, .. } => Some(*value),
            _ => None,
        }
    }
    pub fn is_finite(&self) -> bool {
        matches!(self, ShellResult::Finite { .. })
    }
    pub fn is_divergent(&self) -> bool {
        matches!(self, ShellResult::Divergent { .. })
    }
    pub fn shells(&self) -> usize {
        match self {
            ShellResult::Finite { shells, .. }
            | ShellResult::Divergent { shells, .. }
            | ShellResult::Undetermined { shells, .. } => *shells,
        }
    }
    /// Sum of two results; the weaker diagnostic wins.
    pub fn add(self, other: ShellResult) -> ShellResult {
        use ShellResult::*;
        match (self, other) {
            (Divergent { partial: a, shells: s }, o) | (o, Divergent { partial: a, shells: s }) => {
                Divergent { partial: a + o.partial(), shells: s.max(o.shells()) }
            }
            (Finite { value: a, error: ea, shells: sa }, Finite { value: b, error: eb, shells: sb }) => {
                Finite { value: a + b, error: ea + eb, shells: sa.max(sb) }
            }
            (a, b) => Undetermined { partial: a.partial() + b.partial(), shells: a.shells().max(b.shells()) },
        }
    }
    pub fn partial(&self) -> f64 {
        match self {
            ShellResult::Finite { value, .. } => *value,
            ShellResult::Divergent { partial, .. } | ShellResult::Undetermined { partial, .. } => *partial,
        }
    }
    pub fn scale(self, c: f64) -> ShellResult {
        match self {
            ShellResult::Finite { value, error, shells } => {
                ShellResult::Finite { value: value * c, error: error * crate::math::abs(c), shells }
            }
            ShellResult::Divergent { partial, shells } => ShellResult::Divergent { partial: partial * c, shells },
            ShellResult::Undetermined { partial, shells } => ShellResult::Undetermined { partial: partial * c, shells },
        }
    }
}

/// Parameters of the shell protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellProtocol {
    /// Shells in the ratio fit and in the monotonicity window.
    pub window: usize,
    /// Fitted decay ratio must be below this to declare convergence.
    pub max_ratio: f64,
    /// Geometric tail bound relative to the partial sum.
    pub tail_rel: f64,
    /// Hard cap on the number of shells.
    pub max_shells: usize,
}

impl Default for ShellProtocol {
    fn default() -> Self {
        Self { window: 6, max_ratio: 0.95, tail_rel: 1e-9, max_shells: 1000 }
    }
}

/// Decision on a growing list of non-negative shell sums.
///
/// `None` means "keep going"; `Some(Ok(tail))` is convergence with the
/// geometric tail estimate, `Some(Err(()))` divergence.
pub fn shell_decision(sums: &[f64], proto: &ShellProtocol) -> Option<Result<f64, ()>> {
    let w = proto.window;
    if sums.len() < w {
        return None;
    }
    let last = &sums[sums.len() - w..];
    if last.iter().all(|&s| s == 0.0) {
        return Some(Ok(0.0));
    }
    let non_decreasing = last.windows(2).all(|p| p[1] >= p[0] * (1.0 - 1e-9)) && last[w - 1] > 0.0;
    if non_decreasing {
        return Some(Err(()));
    }
    if last.iter().all(|&s| s > 0.0) {
        let xs: Vec<f64> = (0..w).map(|i| i as f64).collect();
        let ys: Vec<f64> = last.iter().map(|&s| crate::math::ln(s)).collect();
        if let Some((slope, _, _)) = crate::math::linear_fit(&xs, &ys) {
            let r = crate::math::exp(slope);
            let partial: f64 = sums.iter().sum();
            let tail = last[w - 1] * r / (1.0 - r);
            if r < proto.max_ratio && tail < proto.tail_rel * partial {
                return Some(Ok(tail));
            }
        }
    } else if last[w - 1] == 0.0 && last[w - 2] == 0.0 && last[w - 3] == 0.0 {
        // Trailing zeros after a positive stretch: the density has left its support.
        return Some(Ok(0.0));
    }
    None
}

/// Run the protocol over shells produced by `shell(n)`, `n = 0, 1, ...`.
///
/// `shell` returns `Ok(Some(sum))`, or `Ok(None)` when no further shell can be
/// represented (range exhausted). A non-finite shell counts as divergence.
pub fn run_shells<S>(mut shell: S, proto: &ShellProtocol) -> Result<ShellResult, QuadError>
where
    S: FnMut(usize) -> Result<Option<(f64, f64)>, QuadError>,
{
    let mut sums: Vec<f64> = Vec::new();
    let mut signed = 0.0;
    let mut err = 0.0;
    for n in 0..proto.max_shells {
        let (v, e) = match shell(n) {
            Ok(Some(ve)) => ve,
            Ok(None) => break,
            Err(QuadError::NonFinite { .. }) if n > 0 => {
                return Ok(ShellResult::Divergent { partial: signed, shells: n });
            }
            Err(QuadError::NotConverged { .. }) => {
                return Ok(ShellResult::Undetermined { partial: signed, shells: n });
            }
            Err(e) => return Err(e),
        };
        if !v.is_finite() {
            return Ok(ShellResult::Divergent { partial: signed, shells: n + 1 });
        }
        signed += v;
        err += e;
        sums.push(crate::math::abs(v));
        match shell_decision(&sums, proto) {
            Some(Ok(tail)) => {
                // Extend the geometric tail with the sign of the last shell.
                let value = signed + tail.copysign(v);
                return Ok(ShellResult::Finite { value, error: err + tail, shells: n + 1 });
            }
            Some(Err(())) => return Ok(ShellResult::Divergent { partial: signed, shells: n + 1 }),
            None => {}
        }
    }
    Ok(ShellResult::Undetermined { partial: signed, shells: sums.len() })
}
