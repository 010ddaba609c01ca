use serde::{Deserialize, Serialize};

use crate::caputo_l1::FractionalOrder;
use crate::error::Result;
use crate::forcing::Forcing;
use crate::grid::{build_grid, DiscreteDensity};
use crate::jko_solver::{solve, SolverConfig};
use crate::subdiffusion_mc::{endpoint_histogram, McConfig};

use super::fields::FieldTable;
use super::metrics::l1_error;
use super::table::Metadata;

/// Settings for comparing the Monte-Carlo endpoint law with a JKO solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McValidation {
    pub alpha: f64,
    pub forcing: Forcing,
    pub grid_size: usize,
    pub horizon: f64,
    /// Time steps of the deterministic solve.
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub ds: f64,
    pub dt: f64,
}

impl McValidation {
    pub fn new(alpha: f64, forcing: Forcing) -> Self {
        Self {
            alpha,
            forcing,
            grid_size: 32,
            horizon: 1.0,
            steps: 320,
            paths: 200_000,
            seed: 0,
            ds: 1e-3,
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct McComparison {
    pub histogram: DiscreteDensity,
    pub pde: DiscreteDensity,
    pub l1: f64,
}

impl McComparison {
    pub fn to_table(&self, cfg: &McValidation) -> Result<FieldTable> {
        let mut m = Metadata::default();
        m.push("tool", concat!("tfjko ", env!("CARGO_PKG_VERSION")));
        m.push("alpha", cfg.alpha);
        m.push("forcing", cfg.forcing);
        m.push("grid_size", cfg.grid_size);
        m.push("horizon", cfg.horizon);
        m.push("pde_steps", cfg.steps);
        m.push("paths", cfg.paths);
        m.push("seed", cfg.seed);
        m.push("ds", format!("{:e}", cfg.ds));
        m.push("dt", format!("{:e}", cfg.dt));
        m.push("l1_distance", format!("{:e}", self.l1));
        FieldTable::cells(m, self.pde.grid(), &[("mc", &self.histogram), ("pde", &self.pde)])
    }
}

/// Bins `P` simulated endpoints and solves the same problem with the JKO scheme.
pub fn mc_validate(cfg: &McValidation) -> Result<McComparison> {
    let grid = build_grid(cfg.forcing.dim(), cfg.grid_size)?;
    let mut mc = McConfig::new(cfg.alpha, cfg.horizon, cfg.paths, cfg.seed, grid, cfg.forcing)?;
    mc.ds = cfg.ds;
    mc.dt = cfg.dt;
    mc.validate()?;
    let histogram = endpoint_histogram(&mc)?;
    let solver = SolverConfig::new(
        FractionalOrder::new(cfg.alpha)?,
        cfg.horizon,
        cfg.steps,
        cfg.forcing.potential(&grid)?,
        DiscreteDensity::uniform(grid),
    )?;
    let pde = solve(solver)?.last().clone();
    let l1 = l1_error(&histogram, &pde)?;
    Ok(McComparison { histogram, pde, l1 })
}
