//! Probability histograms on a fixed set of bin edges.

use alloc::vec;
use alloc::vec::Vec;
use serde::Serialize;

use super::QsdError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Histogram {
    /// Normalize non-negative bin weights.
    pub fn from_weights(edges: Vec<f64>, weights: Vec<f64>) -> Result<Self, QsdError> {
        if edges.len() != weights.len() + 1 || weights.is_empty() {
            return Err(QsdError::Invalid("need one more edge than bins".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(QsdError::Invalid("bin weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(QsdError::Invalid("histogram has no mass".into()));
        }
        Ok(Self { edges, probs: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Re-bin onto `coarse`, whose edges must all be edges of `self`.
    pub fn rebin(&self, coarse: &[f64]) -> Result<Self, QsdError> {
        let mut w = vec![0.0; coarse.len() - 1];
        let mut k = 0;
        for (i, p) in self.probs.iter().enumerate() {
            let lo = self.edges[i];
            while k + 1 < w.len() && lo >= coarse[k + 1] {
                k += 1;
            }
            w[k] += p;
        }
        Self::from_weights(coarse.to_vec(), w)
    }

    /// Bin centres.
    pub fn centres(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }
}

/// Normalized histogram of `positions`. Points below the first edge count
/// in the first bin, points above the last edge in the last bin.
pub fn estimate_qsd(positions: &[f64], edges: &[f64]) -> Result<Histogram, QsdError> {
    let nb = edges.len().saturating_sub(1);
    if nb == 0 {
        return Err(QsdError::Invalid("need at least two edges".into()));
    }
    let mut w = vec![0.0; nb];
    for &y in positions {
        let k = match edges.partition_point(|&e| e <= y) {
            0 => 0,
            j => (j - 1).min(nb - 1),
        };
        w[k] += 1.0;
    }
    Histogram::from_weights(edges.to_vec(), w)
}

/// Half the L¹ distance.
pub fn tv_distance(a: &Histogram, b: &Histogram) -> Result<f64, QsdError> {
    if a.probs.len() != b.probs.len() {
        return Err(QsdError::Invalid("histograms on different grids".into()));
    }
    let d: f64 = a.probs.iter().zip(&b.probs).map(|(x, y)| (x - y).abs()).sum();
    Ok((0.5 * d).min(1.0))
}

/// Expected TV between an `n`-sample histogram and its law `probs`,
/// `½ Σ √(2p(1−p)/(πn))` in the normal approximation.
pub fn tv_noise_floor(probs: &[f64], n: usize) -> f64 {
    let n = n as f64;
    0.5 * probs.iter().map(|&p| libm::sqrt(2.0 * p * (1.0 - p) / (core::f64::consts::PI * n))).sum::<f64>()
}

/// `k` bins of roughly equal mass under `h`, with edges taken from `h`.
pub fn quantile_edges(h: &Histogram, k: usize) -> Vec<f64> {
    let mut out = Vec::from([h.edges[0]]);
    let mut acc = 0.0;
    let mut next = 1;
    for (i, p) in h.probs.iter().enumerate() {
        acc += p;
        if next < k && acc >= next as f64 / k as f64 && i + 1 < h.probs.len() {
            out.push(h.edges[i + 1]);
            while next < k && acc >= next as f64 / k as f64 {
                next += 1;
            }
        }
    }
    out.push(*h.edges.last().unwrap());
    out
}

/// Quantile edges of a sample (`k` bins, open outer bins).
pub fn sample_quantile_edges(positions: &[f64], k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = positions.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mut out = Vec::from([0.0]);
    for j in 1..k {
        let e = v[(j * v.len()) / k];
        if e > *out.last().unwrap() {
            out.push(e);
        }
    }
    out.push(f64::INFINITY);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_examples() {
        let e = vec![0.0, 1.0, 2.0];
        let a = Histogram::from_weights(e.clone(), vec![0.6, 0.4]).unwrap();
        let b = Histogram::from_weights(e.clone(), vec![0.5, 0.5]).unwrap();
        assert!((tv_distance(&a, &b).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        let c = Histogram::from_weights(e.clone(), vec![1.0, 0.0]).unwrap();
        let d = Histogram::from_weights(e, vec![0.0, 1.0]).unwrap();
        assert_eq!(tv_distance(&c, &d).unwrap(), 1.0);
    }

    #[test]
    fn point_mass_fills_one_bin() {
        let h = estimate_qsd(&[1.5; 10], &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(h.probs, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn rebin_preserves_mass() {
        let h = Histogram::from_weights(vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let q = quantile_edges(&h, 2);
        let r = h.rebin(&q).unwrap();
        assert_eq!(q, vec![0.0, 3.0, 4.0]);
        assert!((r.probs[0] - 0.6).abs() < 1e-15);
    }
}
