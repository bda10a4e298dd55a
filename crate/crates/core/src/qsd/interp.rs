//! Monotone cubic (Fritsch–Carlson) interpolation.

use alloc::vec::Vec;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneCubic {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// `x` strictly increasing, at least one point.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        assert!(n >= 1 && y.len() == n);
        let mut slopes = alloc::vec![0.0; n];
        if n >= 2 {
            let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
            slopes[0] = d[0];
            slopes[n - 1] = d[n - 2];
            for i in 1..n - 1 {
                slopes[i] = if d[i - 1] * d[i] <= 0.0 { 0.0 } else { 0.5 * (d[i - 1] + d[i]) };
            }
            for i in 0..n - 1 {
                if d[i] == 0.0 {
                    slopes[i] = 0.0;
                    slopes[i + 1] = 0.0;
                    continue;
                }
                let (a, b) = (slopes[i] / d[i], slopes[i + 1] / d[i]);
                let r = a * a + b * b;
                if r > 9.0 {
                    let t = 3.0 / libm::sqrt(r);
                    slopes[i] = t * a * d[i];
                    slopes[i + 1] = t * b * d[i];
                }
            }
        }
        Self { x, y, slopes }
    }

    /// Proportional to `x` below the first node, constant above the last.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0] * (t / self.x[0]).max(0.0);
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.x.partition_point(|&v| v <= t) - 1;
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s),
            s * (1.0 - s) * (1.0 - s),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        h00 * self.y[i] + h10 * h * self.slopes[i] + h01 * self.y[i + 1] + h11 * h * self.slopes[i + 1]
    }

    /// Largest value on `[a, b]` (attained at `a`, `b` or a node).
    pub fn max_on(&self, a: f64, b: f64) -> f64 {
        let mut m = self.eval(a).max(self.eval(b));
        let lo = self.x.partition_point(|&v| v < a);
        let hi = self.x.partition_point(|&v| v <= b);
        for i in lo..hi {
            m = m.max(self.y[i]);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_stays_monotone() {
        let x = alloc::vec![0.1, 0.5, 1.0, 2.0, 4.0];
        let y = alloc::vec![0.1, 0.6, 0.9, 1.0, 1.0];
        let f = MonotoneCubic::new(x.clone(), y.clone());
        for (a, b) in x.iter().zip(&y) {
            assert!((f.eval(*a) - b).abs() < 1e-14);
        }
        let mut prev = 0.0;
        for k in 0..400 {
            let v = f.eval(k as f64 * 0.01);
            assert!(v >= prev - 1e-14);
            prev = v;
        }
        assert!((f.eval(0.05) - 0.05).abs() < 1e-14);
        assert_eq!(f.eval(9.0), 1.0);
    }
}
