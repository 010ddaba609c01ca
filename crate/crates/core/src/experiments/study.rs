use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caputo_l1::FractionalOrder;
use crate::entropic_ot::DykstraParams;
use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::grid::{build_grid, DiscreteDensity, SpatialGrid};
use crate::jko_solver::{solve, SolverConfig, Trajectory};

use super::metrics::{fit_rate, l1_error, l2_error, w_error};
use super::table::{ErrorRow, ErrorTable, Metadata, RateRow};

/// Slack factor on the Dykstra tolerance used by the energy checks.
pub const ENERGY_SLACK: f64 = 10.0;

/// A temporal convergence study on a fixed spatial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub forcing: Forcing,
    pub alphas: Vec<f64>,
    pub steps: Vec<usize>,
    pub ref_steps: usize,
    pub grid_size: usize,
    pub horizon: f64,
    /// `None` evaluates W with `gamma = 1/N` of the coarse run.
    pub gamma_eval: Option<f64>,
    /// Dykstra tolerance; `None` means `1e-8` times the cell count.
    pub eps: Option<f64>,
    pub max_iter: usize,
}

impl ExperimentConfig {
    /// Uniform initial datum, `T = 1`, the five-level ladder against `N_ref = 1280`.
    pub fn ladder(forcing: Forcing) -> Self {
        let grid_size = if forcing.dim() == 2 { 32 } else { 128 };
        Self {
            forcing,
            alphas: vec![0.6, 0.8, 1.0],
            steps: vec![20, 40, 80, 160, 320],
            ref_steps: 1280,
            grid_size,
            horizon: 1.0,
            gamma_eval: None,
            eps: None,
            max_iter: DykstraParams::DEFAULT_MAX_ITER,
        }
    }

    pub fn grid(&self) -> Result<SpatialGrid> {
        build_grid(self.forcing.dim(), self.grid_size)
    }

    pub fn dykstra(&self, grid: &SpatialGrid) -> DykstraParams {
        let mut params = DykstraParams::for_cells(grid.len());
        if let Some(eps) = self.eps {
            params.tolerance = eps;
        }
        params.max_iter = self.max_iter;
        params
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.alphas.is_empty() || self.steps.is_empty() {
            return bad("alpha and N lists must be nonempty".into());
        }
        for &a in &self.alphas {
            FractionalOrder::new(a)?;
        }
        if self.steps.contains(&0) {
            return bad("N must be positive".into());
        }
        let max_n = *self.steps.iter().max().expect("nonempty");
        if self.ref_steps < max_n {
            return bad(format!("reference N {} below ladder maximum {max_n}", self.ref_steps));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon {}", self.horizon));
        }
        if let Some(g) = self.gamma_eval {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidGamma(g));
            }
        }
        if let Some(e) = self.eps {
            if !(e > 0.0 && e.is_finite()) {
                return bad(format!("eps {e}"));
            }
        }
        if self.max_iter == 0 {
            return bad("max iterations must be positive".into());
        }
        self.grid()?;
        Ok(())
    }

    fn solver_config(&self, alpha: f64, steps: usize) -> Result<SolverConfig> {
        let grid = self.grid()?;
        let mut cfg = SolverConfig::new(
            FractionalOrder::new(alpha)?,
            self.horizon,
            steps,
            self.forcing.potential(&grid)?,
            DiscreteDensity::uniform(grid),
        )?;
        cfg.dykstra = self.dykstra(&grid);
        Ok(cfg)
    }

    pub fn gamma_eval_for(&self, steps: usize) -> f64 {
        self.gamma_eval.unwrap_or(1.0 / steps as f64)
    }
}

/// Worst-case solver health over every run of a study.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_mass_defect: f64,
    /// Max over runs and levels of `F(p^n) - F(p^0) - n * 10 eps`; nonpositive when the bound holds.
    pub max_energy_excess: f64,
    /// Max of `F(p^n) - F(p_bar^{n-1}) - 10 eps`.
    pub max_step_energy_excess: f64,
    /// Max of `F(p_bar^{n-1}) - sum_i w_i F(p^i)`; nonpositive by convexity.
    pub max_jensen_gap: f64,
    pub max_dykstra_iterations: usize,
}

impl Diagnostics {
    fn absorb(&mut self, traj: &Trajectory, eps: f64) {
        let slack = ENERGY_SLACK * eps;
        let f0 = traj.initial_energy();
        for r in traj.reports() {
            self.max_mass_defect = self.max_mass_defect.max(r.mass_defect);
            self.max_energy_excess = self
                .max_energy_excess
                .max(r.energy - f0 - r.level as f64 * slack);
            self.max_step_energy_excess = self
                .max_step_energy_excess
                .max(r.energy - r.history_energy - slack);
            self.max_jensen_gap = self.max_jensen_gap.max(r.history_energy - r.jensen_bound);
            self.max_dykstra_iterations = self.max_dykstra_iterations.max(r.iterations);
        }
    }

    fn empty() -> Self {
        Self {
            max_mass_defect: 0.0,
            max_energy_excess: f64::NEG_INFINITY,
            max_step_energy_excess: f64::NEG_INFINITY,
            max_jensen_gap: f64::NEG_INFINITY,
            max_dykstra_iterations: 0,
        }
    }
}

/// Table plus solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub table: ErrorTable,
    pub diagnostics: Diagnostics,
}

fn cell<T>(alpha: f64, steps: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::CellFailed {
        alpha,
        steps,
        source: Box::new(e),
    })
}

/// Reference solves first, then every `(alpha, N)` cell; both phases run on
/// the rayon pool and are gathered in input order.
pub fn run_study(config: &ExperimentConfig) -> Result<StudyResult> {
    config.validate()?;
    let grid = config.grid()?;
    let eps = config.dykstra(&grid).tolerance;

    let references: Vec<Trajectory> = config
        .alphas
        .par_iter()
        .map(|&a| cell(a, config.ref_steps, config.solver_config(a, config.ref_steps).and_then(solve)))
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..config.alphas.len())
        .flat_map(|i| config.steps.iter().map(move |&n| (i, n)))
        .collect();
    let runs: Vec<(ErrorRow, Trajectory)> = cells
        .par_iter()
        .map(|&(i, n)| {
            let alpha = config.alphas[i];
            cell(alpha, n, (|| {
                let traj = solve(config.solver_config(alpha, n)?)?;
                let reference = references[i].last();
                let p = traj.last();
                let row = ErrorRow {
                    alpha,
                    steps: n,
                    e_l1: l1_error(p, reference)?,
                    e_l2: l2_error(p, reference)?,
                    e_w: w_error(p, reference, config.gamma_eval_for(n))?,
                };
                Ok((row, traj))
            })())
        })
        .collect::<Result<_>>()?;

    let mut diagnostics = Diagnostics::empty();
    for traj in references.iter().chain(runs.iter().map(|(_, t)| t)) {
        diagnostics.absorb(traj, eps);
    }
    let rows: Vec<ErrorRow> = runs.into_iter().map(|(r, _)| r).collect();
    let rates = config
        .alphas
        .iter()
        .map(|&alpha| {
            let mine: Vec<&ErrorRow> = rows.iter().filter(|r| r.alpha == alpha).collect();
            let ns: Vec<usize> = mine.iter().map(|r| r.steps).collect();
            let fit = |get: fn(&ErrorRow) -> f64| {
                let errs: Vec<f64> = mine.iter().map(|r| get(r)).collect();
                fit_rate(&errs, &ns, config.horizon)
            };
            RateRow {
                alpha,
                l1: fit(|r| r.e_l1),
                l2: fit(|r| r.e_l2),
                w: fit(|r| r.e_w),
            }
        })
        .collect();

    let table = ErrorTable {
        metadata: metadata(config, &grid, eps, &diagnostics),
        rows,
        rates,
    };
    Ok(StudyResult { table, diagnostics })
}

/// [`run_study`] without the diagnostics.
pub fn run_convergence_study(config: &ExperimentConfig) -> Result<ErrorTable> {
    run_study(config).map(|s| s.table)
}

fn metadata(config: &ExperimentConfig, grid: &SpatialGrid, eps: f64, d: &Diagnostics) -> Metadata {
    let mut m = Metadata::default();
    m.push("tool", concat!("tfjko ", env!("CARGO_PKG_VERSION")));
    m.push("forcing", config.forcing);
    m.push("dim", grid.dim());
    m.push("grid_size", grid.cells_per_axis());
    m.push("horizon", config.horizon);
    m.push("initial", "uniform");
    m.push("ref_steps", config.ref_steps);
    m.push("gamma_rule", "1/N");
    m.push(
        "gamma_eval",
        config.gamma_eval.map_or_else(|| "1/N".to_string(), |g| format!("{g:e}")),
    );
    m.push("w_convention", "sqrt(<C,pi>), entropy term excluded");
    m.push("dykstra_eps", format!("{eps:e}"));
    m.push("dykstra_max_iter", config.max_iter);
    m.push("max_mass_defect", format!("{:e}", d.max_mass_defect));
    m.push("max_energy_excess", format!("{:e}", d.max_energy_excess));
    m.push("max_jensen_gap", format!("{:e}", d.max_jensen_gap));
    m.push("max_dykstra_iterations", d.max_dykstra_iterations);
    m
}
