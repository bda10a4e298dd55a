//! Node grids shared by the spectral oracle and the chain engine.
//!
//! Nodes are placed in original coordinates: geometric near 0 (resolving
//! `1/y`-type densities), uniform above. Cells are the natural-scale
//! midpoint cells, the first one starting halfway to the absorbing point.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math::{exp, ln};
use crate::measures::{DiffusionSpec, MeasureError};

/// Grid layout in original coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_nodes: usize,
    pub y_min: f64,
    /// End of the geometric segment.
    pub y_switch: f64,
    /// Fraction of nodes in the geometric segment.
    pub geometric_fraction: f64,
    pub y_max: f64,
}

impl GridSpec {
    pub fn new(n_nodes: usize, y_max: f64) -> Self {
        Self { n_nodes, y_min: 1e-6, y_switch: 0.1, geometric_fraction: 0.25, y_max }
    }

    /// Node positions in original coordinates.
    pub fn nodes(&self) -> Vec<f64> {
        let n = self.n_nodes.max(2);
        let switch = self.y_switch.clamp(self.y_min, self.y_max);
        let n_geo = if switch > self.y_min { libm::round((n as f64) * self.geometric_fraction) as usize } else { 0 };
        let n_geo = n_geo.min(n - 1);
        let n_uni = n - n_geo;
        let mut out = Vec::with_capacity(n);
        if n_geo > 0 {
            let (la, lb) = (ln(self.y_min), ln(switch));
            for j in 0..n_geo {
                out.push(exp(la + (lb - la) * j as f64 / n_geo as f64));
            }
        }
        let start = if n_geo > 0 { switch } else { self.y_min };
        for j in 0..n_uni {
            let frac = if n_uni == 1 { 1.0 } else { j as f64 / (n_uni - 1) as f64 };
            out.push(start + (self.y_max - start) * frac);
        }
        out
    }
}

/// Nodes and cell edges in both coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    /// Nodes, original coordinate.
    pub y: Vec<f64>,
    /// Nodes, natural coordinate.
    pub x: Vec<f64>,
    /// `N + 1` cell edges, natural coordinate.
    pub x_edges: Vec<f64>,
    /// Same edges, original coordinate.
    pub y_edges: Vec<f64>,
}

impl Grid {
    /// Grid for `spec`, which may be in either coordinate system.
    pub fn build(spec: &DiffusionSpec, gs: &GridSpec) -> Result<Self, MeasureError> {
        Self::from_nodes(spec, gs.nodes())
    }

    pub fn from_nodes(spec: &DiffusionSpec, y: Vec<f64>) -> Result<Self, MeasureError> {
        if y.len() < 2 || y.windows(2).any(|w| !(w[1] > w[0])) || !(y[0] > 0.0) {
            return Err(MeasureError::Invalid("grid must be positive and strictly increasing".into()));
        }
        let x: Vec<f64> = y.iter().map(|&v| spec.to_natural(v)).collect();
        if x.iter().any(|v| !v.is_finite()) || x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MeasureError::Invalid("grid not representable in natural scale".into()));
        }
        let n = x.len();
        let mut x_edges = Vec::with_capacity(n + 1);
        x_edges.push(0.5 * x[0]);
        for i in 0..n - 1 {
            x_edges.push(0.5 * (x[i] + x[i + 1]));
        }
        x_edges.push(x[n - 1]);
        let scale = match (&spec.origin, spec.is_natural()) {
            (_, false) => Some(spec.scale.clone()),
            (Some(s), true) => Some(s.clone()),
            _ => None,
        };
        let mut y_edges = Vec::with_capacity(n + 1);
        for (i, &e) in x_edges.iter().enumerate() {
            let v = if i == n {
                y[n - 1]
            } else {
                match &scale {
                    Some(s) => s.inverse(e)?,
                    None => e,
                }
            };
            y_edges.push(v);
        }
        Ok(Grid { y, x, x_edges, y_edges })
    }

    /// Grid directly in natural coordinates (no scale map).
    pub fn natural(x: Vec<f64>) -> Result<Self, MeasureError> {
        let spec = DiffusionSpec::natural("grid", crate::measures::Measure1D::zero(), crate::measures::Measure1D::zero());
        Self::from_nodes(&spec, x)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Index of the cell containing original-coordinate point `y`, if any.
    pub fn cell_of_y(&self, y: f64) -> Option<usize> {
        cell_index(&self.y_edges, y)
    }

    /// Index of the node nearest to `y` in the cell sense.
    pub fn snap_y(&self, y: f64) -> Option<usize> {
        if !(y > 0.0) || y > *self.y_edges.last().unwrap() {
            return None;
        }
        cell_index(&self.y_edges, y.max(self.y_edges[0]))
    }
}

/// `i` with `edges[i] ≤ v < edges[i+1]`; the last edge is included.
pub fn cell_index(edges: &[f64], v: f64) -> Option<usize> {
    let n = edges.len();
    if n < 2 || !(v >= edges[0]) || !(v <= edges[n - 1]) {
        return None;
    }
    let j = edges.partition_point(|&e| e <= v);
    Some(j.saturating_sub(1).min(n - 2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_layout() {
        let g = GridSpec::new(200, 6.0).nodes();
        assert_eq!(g.len(), 200);
        assert!((g[0] - 1e-6).abs() < 1e-18);
        assert!((g[50] - 0.1).abs() < 1e-15);
        assert!((g[199] - 6.0).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn cells_partition() {
        let e = [0.5, 1.0, 2.0, 3.0];
        assert_eq!(cell_index(&e, 0.5), Some(0));
        assert_eq!(cell_index(&e, 1.0), Some(1));
        assert_eq!(cell_index(&e, 3.0), Some(2));
        assert_eq!(cell_index(&e, 3.5), None);
    }
}
