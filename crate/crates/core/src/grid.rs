//! Uniform cell grids on the unit interval and unit square.
//!
//! Densities are stored as cell probabilities: the mesh width is absorbed,
//! so `p_i` is the mass of cell `i` and the entries sum to one. 2D cells are
//! indexed row-major, `index = i_x * M + i_y`.

use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`DiscreteDensity`].
pub const MASS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialGrid {
    dim: usize,
    cells_per_axis: usize,
}

impl SpatialGrid {
    pub fn new(dim: usize, cells_per_axis: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) || cells_per_axis == 0 {
            return Err(Error::InvalidGrid {
                dim,
                cells: cells_per_axis,
            });
        }
        Ok(Self {
            dim,
            cells_per_axis,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    /// Total number of cells, `M^d`.
    #[inline]
    pub fn len(&self) -> usize {
        self.cells_per_axis.pow(self.dim as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mesh width `h = 1/M`.
    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.cells_per_axis as f64
    }

    /// Cell volume `h^d`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Midpoints `(i + 1/2) h` along one axis.
    pub fn axis_midpoints(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.cells_per_axis)
            .map(|i| (i as f64 + 0.5) * h)
            .collect()
    }

    /// Midpoint of a cell; the second coordinate is unused in 1D.
    pub fn midpoint(&self, cell: usize) -> [f64; 2] {
        let h = self.h();
        match self.dim {
            1 => [(cell as f64 + 0.5) * h, 0.0],
            _ => {
                let (ix, iy) = (cell / self.cells_per_axis, cell % self.cells_per_axis);
                [(ix as f64 + 0.5) * h, (iy as f64 + 0.5) * h]
            }
        }
    }

    /// Midpoint coordinates as a slice of length `dim`.
    pub fn point(&self, cell: usize) -> Vec<f64> {
        self.midpoint(cell)[..self.dim].to_vec()
    }

    /// Cell containing a point of the closed domain (boundary points are
    /// assigned to the adjacent cell).
    pub fn locate(&self, x: &[f64]) -> usize {
        let m = self.cells_per_axis;
        let axis = |v: f64| ((v * m as f64).floor().max(0.0) as usize).min(m - 1);
        match self.dim {
            1 => axis(x[0]),
            _ => axis(x[0]) * m + axis(x[1]),
        }
    }

    fn ensure_same(&self, other: &SpatialGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// `build_grid(d, M)`.
pub fn build_grid(dim: usize, cells_per_axis: usize) -> Result<SpatialGrid> {
    SpatialGrid::new(dim, cells_per_axis)
}

/// Cell probabilities on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDensity {
    grid: SpatialGrid,
    probs: Vec<f64>,
}

impl DiscreteDensity {
    /// Wraps probabilities that already lie on the simplex.
    pub fn new(grid: SpatialGrid, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != grid.len() {
            return Err(Error::InvalidDensity(format!(
                "{} values for {} cells",
                probs.len(),
                grid.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidDensity(format!("entry {bad} is not a probability")));
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDensity(format!("total mass {mass}")));
        }
        Ok(Self { grid, probs })
    }

    /// Normalizes nonnegative weights onto the simplex.
    pub fn from_weights(grid: SpatialGrid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::InvalidDensity(format!(
                "{} values for {} cells",
                weights.len(),
                grid.len()
            )));
        }
        if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidDensity(format!("negative or non-finite sample {bad}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDensity("all samples are zero".into()));
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { grid, probs })
    }

    /// Builds a density without validation. Callers guarantee the simplex
    /// property up to solver tolerance.
    pub(crate) fn from_raw(grid: SpatialGrid, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), grid.len());
        Self { grid, probs }
    }

    pub fn uniform(grid: SpatialGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn one_hot(grid: SpatialGrid, cell: usize) -> Result<Self> {
        if cell >= grid.len() {
            return Err(Error::InvalidDensity(format!("cell {cell} out of range")));
        }
        let mut probs = vec![0.0; grid.len()];
        probs[cell] = 1.0;
        Ok(Self { grid, probs })
    }

    #[inline]
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Function values `p_i / h^d` of the piecewise constant density.
    pub fn function_values(&self) -> Vec<f64> {
        let vol = self.grid.cell_volume();
        self.probs.iter().map(|p| p / vol).collect()
    }

    pub(crate) fn ensure_grid(&self, other: &SpatialGrid) -> Result<()> {
        self.grid.ensure_same(other)
    }
}

/// Samples `u0` at cell midpoints and normalizes onto the simplex.
pub fn density_from_function<F: Fn(&[f64]) -> f64>(
    grid: &SpatialGrid,
    u0: F,
) -> Result<DiscreteDensity> {
    let samples = (0..grid.len()).map(|c| u0(&grid.point(c))).collect();
    DiscreteDensity::from_weights(*grid, samples)
}

/// Midpoint samples of the forcing potential.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl Potential {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidConfig(format!(
                "potential has {} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("potential must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_function<F: Fn(&[f64]) -> f64>(grid: &SpatialGrid, psi: F) -> Result<Self> {
        let values = (0..grid.len()).map(|c| psi(&grid.point(c))).collect();
        Self::new(*grid, values)
    }

    pub fn zero(grid: &SpatialGrid) -> Self {
        Self {
            grid: *grid,
            values: vec![0.0; grid.len()],
        }
    }

    #[inline]
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn ensure_grid(&self, other: &SpatialGrid) -> Result<()> {
        self.grid.ensure_same(other)
    }
}

/// Squared Euclidean cost between cell midpoints.
///
/// Only the per-axis factor `c^{(x)}_{ij} = (x_i - x_j)^2` is stored; the full
/// cost in 2D is `c^{(x)} (+) c^{(y)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    grid: SpatialGrid,
    axis: Vec<f64>,
}

impl CostMatrix {
    #[inline]
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Row-major `M x M` per-axis cost.
    #[inline]
    pub fn axis_cost(&self) -> &[f64] {
        &self.axis
    }

    /// Entry `c_ij` between two cells of the grid.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let m = self.grid.cells_per_axis;
        match self.grid.dim {
            1 => self.axis[i * m + j],
            _ => {
                let (ix, iy) = (i / m, i % m);
                let (jx, jy) = (j / m, j % m);
                self.axis[ix * m + jx] + self.axis[iy * m + jy]
            }
        }
    }

    /// The full `M^d x M^d` matrix, row-major. Intended for small grids.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.grid.len();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.entry(i, j));
            }
        }
        out
    }
}

pub fn cost_matrix(grid: &SpatialGrid) -> CostMatrix {
    let mids = grid.axis_midpoints();
    let axis = mids
        .iter()
        .flat_map(|x| mids.iter().map(move |y| (x - y) * (x - y)))
        .collect();
    CostMatrix { grid: *grid, axis }
}

/// Midpoint rule `h^d sum f_i`.
pub fn midpoint_integral(grid: &SpatialGrid, values: &[f64]) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} values for {} cells",
            values.len(),
            grid.len()
        )));
    }
    Ok(grid.cell_volume() * values.iter().sum::<f64>())
}
