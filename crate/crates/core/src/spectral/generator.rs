//! Finite-volume discretization of `½ d/dm d/dx − dk/dm` on a grid.

use alloc::vec;
use alloc::vec::Vec;
use serde::Serialize;

use super::SpectralError;
use crate::grid::Grid;
use crate::measures::DiffusionSpec;

/// Treatment of the last node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopBoundary {
    Reflecting,
    /// Absorbing ghost node one spacing above the last node.
    Dirichlet,
}

/// Sub-Markov generator `L = M⁻¹A` of a birth–death chain on the grid
/// nodes, absorbed below the first node. `A` is symmetric tridiagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizedGenerator {
    pub grid: Grid,
    /// Speed cell masses `mᵢ`.
    pub mass: Vec<f64>,
    /// Killing cell masses `kᵢ`.
    pub kill_mass: Vec<f64>,
    /// `kᵢ/mᵢ`.
    pub kill_rate: Vec<f64>,
    /// Conductance between node `i−1` and `i` (`i = 0`: to the absorbing point).
    pub cond_down: Vec<f64>,
    /// Conductance above the last node (0 when reflecting).
    pub cond_top: f64,
    pub top: TopBoundary,
}

impl DiscretizedGenerator {
    /// Build from explicit cell data (natural-scale nodes `x`).
    pub fn from_parts(x: Vec<f64>, mass: Vec<f64>, kill_mass: Vec<f64>, top: TopBoundary) -> Result<Self, SpectralError> {
        let grid = Grid::natural(x).map_err(SpectralError::Measure)?;
        Self::assemble(grid, mass, kill_mass, top)
    }

    fn assemble(grid: Grid, mass: Vec<f64>, kill_mass: Vec<f64>, top: TopBoundary) -> Result<Self, SpectralError> {
        let n = grid.len();
        if mass.len() != n || kill_mass.len() != n {
            return Err(SpectralError::Invalid("cell data length mismatch".into()));
        }
        for (i, &m) in mass.iter().enumerate() {
            if !(m > 0.0) || !m.is_finite() {
                return Err(SpectralError::EmptyCell { index: i, x: grid.x[i] });
            }
        }
        let x = &grid.x;
        let mut cond_down = Vec::with_capacity(n);
        cond_down.push(1.0 / (2.0 * x[0]));
        for i in 1..n {
            cond_down.push(1.0 / (2.0 * (x[i] - x[i - 1])));
        }
        let cond_top = match top {
            TopBoundary::Reflecting => 0.0,
            TopBoundary::Dirichlet => {
                let h = if n > 1 { x[n - 1] - x[n - 2] } else { x[0] };
                1.0 / (2.0 * h)
            }
        };
        let kill_rate = kill_mass.iter().zip(&mass).map(|(k, m)| k / m).collect();
        Ok(Self { grid, mass, kill_mass, kill_rate, cond_down, cond_top, top })
    }

    pub fn n(&self) -> usize {
        self.mass.len()
    }

    /// Conductance between node `i` and `i+1` (top conductance for the last node).
    pub fn cond_up(&self, i: usize) -> f64 {
        if i + 1 < self.n() {
            self.cond_down[i + 1]
        } else {
            self.cond_top
        }
    }

    /// Off-diagonal rates of `L`: `(down, up)` from node `i`.
    pub fn rates(&self, i: usize) -> (f64, f64) {
        let m = self.mass[i];
        let down = if i > 0 { self.cond_down[i] / m } else { 0.0 };
        let up = if i + 1 < self.n() { self.cond_up(i) / m } else { 0.0 };
        (down, up)
    }

    /// Leak to the absorbing point (node 0 only) and through the top.
    pub fn leak(&self, i: usize) -> f64 {
        let mut l = 0.0;
        if i == 0 {
            l += self.cond_down[0] / self.mass[0];
        }
        if i + 1 == self.n() {
            l += self.cond_top / self.mass[i];
        }
        l
    }

    /// Diffusion part of the diagonal, `−(c₋ + c₊)/mᵢ`.
    pub fn diffusion_diag(&self, i: usize) -> f64 {
        -(self.cond_down[i] + self.cond_up(i)) / self.mass[i]
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diffusion_diag(i) - self.kill_rate[i]
    }

    /// `(sub, diag, super)` diagonals of `L`.
    pub fn tridiagonal(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut lo = vec![0.0; n];
        let mut di = vec![0.0; n];
        let mut up = vec![0.0; n];
        for i in 0..n {
            let (d, u) = self.rates(i);
            lo[i] = d;
            up[i] = u;
            di[i] = self.diag(i);
        }
        (lo, di, up)
    }

    /// `L f`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let (d, u) = self.rates(i);
                let mut v = self.diag(i) * f[i];
                if i > 0 {
                    v += d * f[i - 1];
                }
                if i + 1 < n {
                    v += u * f[i + 1];
                }
                v
            })
            .collect()
    }

    /// `α L` for a row vector `α`.
    pub fn apply_left(&self, a: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|j| {
                let mut v = a[j] * self.diag(j);
                if j > 0 {
                    v += a[j - 1] * self.rates(j - 1).1;
                }
                if j + 1 < n {
                    v += a[j + 1] * self.rates(j + 1).0;
                }
                v
            })
            .collect()
    }

    /// `‖L‖∞` (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n())
            .map(|i| {
                let (d, u) = self.rates(i);
                d + u + self.diag(i).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Dense row-major copy of `L`.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.n();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            let (d, u) = self.rates(i);
            a[i * n + i] = self.diag(i);
            if i > 0 {
                a[i * n + i - 1] = d;
            }
            if i + 1 < n {
                a[i * n + i + 1] = u;
            }
        }
        a
    }

    /// Same chain with the killing rate raised by `c` everywhere.
    pub fn with_extra_killing(&self, c: f64) -> Self {
        let mut g = self.clone();
        for i in 0..g.n() {
            g.kill_rate[i] += c;
            g.kill_mass[i] += c * g.mass[i];
        }
        g
    }

    /// Same grid with the other top boundary treatment.
    pub fn with_top(&self, top: TopBoundary) -> Result<Self, SpectralError> {
        Self::assemble(self.grid.clone(), self.mass.clone(), self.kill_mass.clone(), top)
    }
}

/// Discretize a natural-scale spec on `grid`: cell masses of `m` and `k`
/// (atoms land in their cells exactly).
pub fn discretize_generator(spec: &DiffusionSpec, grid: &Grid, top: TopBoundary) -> Result<DiscretizedGenerator, SpectralError> {
    if !spec.is_natural() {
        return Err(SpectralError::Measure(crate::measures::MeasureError::NotNaturalScale));
    }
    let n = grid.len();
    let mut mass = Vec::with_capacity(n);
    let mut kill = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (grid.x_edges[i], grid.x_edges[i + 1]);
        let m = spec.speed.cell_mass(a, b).map_err(SpectralError::Measure)?;
        if !(m > 0.0) {
            return Err(SpectralError::EmptyCell { index: i, x: grid.x[i] });
        }
        mass.push(m);
        kill.push(spec.killing.cell_mass(a, b).map_err(SpectralError::Measure)?);
    }
    // The last edge is the last node; an atom sitting exactly there belongs
    // to the last cell.
    for at in spec.speed.atoms() {
        if at.location == grid.x_edges[n] {
            mass[n - 1] += at.mass;
        }
    }
    for at in spec.killing.atoms() {
        if at.location == grid.x_edges[n] {
            kill[n - 1] += at.mass;
        }
    }
    DiscretizedGenerator::assemble(grid.clone(), mass, kill, top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Measure1D;

    #[test]
    fn lebesgue_speed_gives_half_second_difference() {
        let h = 0.1;
        let x: Vec<f64> = (1..=20).map(|i| i as f64 * h).collect();
        let spec = DiffusionSpec::natural("bm", Measure1D::lebesgue(1.0), Measure1D::zero());
        let grid = Grid::natural(x).unwrap();
        let g = discretize_generator(&spec, &grid, TopBoundary::Reflecting).unwrap();
        for i in 1..19 {
            let (d, u) = g.rates(i);
            assert!((d - 1.0 / (2.0 * h * h)).abs() < 1e-9);
            assert!((u - 1.0 / (2.0 * h * h)).abs() < 1e-9);
            assert!((g.diag(i) + 1.0 / (h * h)).abs() < 1e-9);
        }
    }

    #[test]
    fn constants_are_annihilated_up_to_killing() {
        let spec = DiffusionSpec::natural(
            "k",
            Measure1D::lebesgue(1.0),
            Measure1D::from_density(crate::real_fn(|x| 0.3 + x)),
        );
        let grid = Grid::natural((1..=30).map(|i| i as f64 * 0.05).collect()).unwrap();
        let g = discretize_generator(&spec, &grid, TopBoundary::Reflecting).unwrap();
        let lf = g.apply(&vec![1.0; 30]);
        for i in 1..30 {
            assert!((lf[i] + g.kill_rate[i]).abs() < 1e-10, "{i}");
        }
        let shifted = g.with_extra_killing(0.25);
        for i in 0..30 {
            assert!((shifted.diag(i) - g.diag(i) + 0.25).abs() < 1e-13);
        }
    }

    #[test]
    fn empty_cell_is_rejected() {
        let spec = DiffusionSpec::natural("gap", Measure1D::lebesgue(1.0).with_support(0.0, 0.5).unwrap(), Measure1D::zero());
        let grid = Grid::natural(vec![0.1, 0.2, 0.3, 1.0, 2.0]).unwrap();
        assert!(matches!(
            discretize_generator(&spec, &grid, TopBoundary::Reflecting),
            Err(SpectralError::EmptyCell { .. })
        ));
    }
}
