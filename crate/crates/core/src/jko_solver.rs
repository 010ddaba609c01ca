//! Time-fractional JKO stepping.
//!
//! Level `n` minimizes `C_alpha/(2 tau^alpha) W_2^2(rho, rho_bar) + F(rho)`
//! where `rho_bar = sum_i -b_{n-i}^{(n)} rho^i` mixes every earlier level.
//! The Wasserstein term is entropically regularized with `gamma` and the
//! step is solved by [`dykstra_jko_step`].

use serde::{Deserialize, Serialize};

use crate::caputo_l1::{FractionalOrder, HistoryWeights, WeightCache};
use crate::entropic_ot::{
    dykstra_jko_step, gibbs_kernel, DykstraParams, GibbsKernel, Representation,
};
use crate::error::{Error, Result};
use crate::grid::{cost_matrix, DiscreteDensity, Potential, SpatialGrid};

/// How the entropic parameter is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaRule {
    /// `gamma = 1/N`.
    InverseSteps,
    Fixed(f64),
}

impl GammaRule {
    pub fn gamma(self, steps: usize) -> f64 {
        match self {
            GammaRule::InverseSteps => 1.0 / steps as f64,
            GammaRule::Fixed(g) => g,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub order: FractionalOrder,
    pub horizon: f64,
    pub steps: usize,
    pub potential: Potential,
    pub initial: DiscreteDensity,
    pub gamma_rule: GammaRule,
    pub dykstra: DykstraParams,
    /// `None` picks [`Representation::auto`].
    pub representation: Option<Representation>,
}

impl SolverConfig {
    /// Defaults: `gamma = 1/N`, `eps = 1e-8 M`, `L = 5000`, automatic kernel.
    pub fn new(
        order: FractionalOrder,
        horizon: f64,
        steps: usize,
        potential: Potential,
        initial: DiscreteDensity,
    ) -> Result<Self> {
        let cells = potential.grid().len();
        let config = Self {
            order,
            horizon,
            steps,
            potential,
            initial,
            gamma_rule: GammaRule::InverseSteps,
            dykstra: DykstraParams::for_cells(cells),
            representation: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!("horizon {}", self.horizon)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("step count must be positive".into()));
        }
        let gamma = self.gamma();
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidGamma(gamma));
        }
        self.initial.ensure_grid(self.potential.grid())?;
        Ok(())
    }

    #[inline]
    pub fn grid(&self) -> &SpatialGrid {
        self.potential.grid()
    }

    #[inline]
    pub fn tau(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma_rule.gamma(self.steps)
    }

    /// `tau' = 2 tau^alpha / C_alpha`.
    pub fn tau_prime(&self) -> f64 {
        2.0 * self.tau().powf(self.order.alpha()) / self.order.c_alpha()
    }

    pub fn representation(&self) -> Representation {
        self.representation
            .unwrap_or_else(|| Representation::auto(self.grid(), self.gamma()))
    }
}

/// `sum_i p_i (log p_i + psi_i)` with `0 log 0 = 0`.
pub fn free_energy(p: &DiscreteDensity, psi: &Potential) -> f64 {
    p.probs()
        .iter()
        .zip(psi.values())
        .map(|(&x, &s)| if x > 0.0 { x * (x.ln() + s) } else { 0.0 })
        .sum()
}

/// Convex combination `sum_i w_i p^i` of a trajectory prefix.
pub fn history_combination(
    prefix: &[DiscreteDensity],
    weights: &HistoryWeights,
) -> Result<DiscreteDensity> {
    let first = prefix
        .first()
        .ok_or_else(|| Error::InvalidConfig("empty history".into()))?;
    if prefix.len() != weights.level() {
        return Err(Error::SampleCount {
            expected: weights.level(),
            got: prefix.len(),
        });
    }
    let grid = *first.grid();
    let mut acc = vec![0.0; grid.len()];
    for (p, &w) in prefix.iter().zip(weights.weights()) {
        p.ensure_grid(&grid)?;
        if w == 0.0 {
            continue;
        }
        for (a, x) in acc.iter_mut().zip(p.probs()) {
            *a += w * x;
        }
    }
    Ok(DiscreteDensity::from_raw(grid, acc))
}

/// Per-level diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub level: usize,
    pub iterations: usize,
    pub violation: f64,
    /// `F(rho_bar^{n-1})`.
    pub history_energy: f64,
    /// `sum_i w_i F(rho^i)`, the Jensen upper bound for `history_energy`.
    pub jensen_bound: f64,
    /// `F(rho^n)`.
    pub energy: f64,
    /// `|sum_i rho^n_i - 1|`.
    pub mass_defect: f64,
}

/// Densities `rho^0, ..., rho^N` on a uniform time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    densities: Vec<DiscreteDensity>,
    reports: Vec<StepReport>,
    horizon: f64,
    initial_energy: f64,
}

impl Trajectory {
    pub fn densities(&self) -> &[DiscreteDensity] {
        &self.densities
    }

    pub fn reports(&self) -> &[StepReport] {
        &self.reports
    }

    pub fn steps(&self) -> usize {
        self.densities.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn tau(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    pub fn initial_energy(&self) -> f64 {
        self.initial_energy
    }

    pub fn last(&self) -> &DiscreteDensity {
        self.densities.last().expect("trajectory holds rho^0")
    }

    /// Piecewise constant interpolant: `rho^n` on `((n-1) tau, n tau]`, `rho^0` at 0.
    pub fn interpolant(&self, t: f64) -> Result<&DiscreteDensity> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let n = self.steps();
        let level = ((t / self.tau()).ceil() as usize).min(n);
        Ok(&self.densities[level])
    }
}

/// Sequential solver state; one [`step`](JkoSolver::step) per time level.
pub struct JkoSolver {
    config: SolverConfig,
    kernel: GibbsKernel,
    weights: WeightCache,
    densities: Vec<DiscreteDensity>,
    energies: Vec<f64>,
    reports: Vec<StepReport>,
}

impl JkoSolver {
    pub fn new(config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let cost = cost_matrix(config.grid());
        let kernel = gibbs_kernel(&cost, config.gamma(), config.representation())?;
        let weights = WeightCache::new(config.order, config.steps)?;
        let initial_energy = free_energy(&config.initial, &config.potential);
        Ok(Self {
            densities: vec![config.initial.clone()],
            energies: vec![initial_energy],
            reports: Vec::with_capacity(config.steps),
            kernel,
            weights,
            config,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn kernel(&self) -> &GibbsKernel {
        &self.kernel
    }

    /// Number of levels computed so far.
    pub fn level(&self) -> usize {
        self.densities.len() - 1
    }

    pub fn densities(&self) -> &[DiscreteDensity] {
        &self.densities
    }

    pub fn reports(&self) -> &[StepReport] {
        &self.reports
    }

    /// `rho_bar^{n-1}` for the next level `n`.
    pub fn next_history(&self) -> Result<DiscreteDensity> {
        let n = self.level() + 1;
        history_combination(&self.densities, &self.weights.history(n)?)
    }

    /// Advances one level and returns the new density.
    pub fn step(&mut self) -> Result<&DiscreteDensity> {
        let n = self.level() + 1;
        let wrap = |e: Error| Error::StepFailed {
            level: n,
            source: Box::new(e),
        };
        let hist = self.weights.history(n).map_err(wrap)?;
        let q_bar = history_combination(&self.densities, &hist).map_err(wrap)?;
        let outcome = dykstra_jko_step(
            &q_bar,
            &self.kernel,
            &self.config.potential,
            self.config.tau_prime(),
            self.config.dykstra,
        )
        .map_err(wrap)?;

        let psi = &self.config.potential;
        let jensen_bound = hist
            .weights()
            .iter()
            .zip(&self.energies)
            .map(|(w, e)| w * e)
            .sum();
        let energy = free_energy(&outcome.density, psi);
        self.reports.push(StepReport {
            level: n,
            iterations: outcome.iterations,
            violation: outcome.violation,
            history_energy: free_energy(&q_bar, psi),
            jensen_bound,
            energy,
            mass_defect: (outcome.density.total_mass() - 1.0).abs(),
        });
        self.energies.push(energy);
        self.densities.push(outcome.density);
        Ok(self.densities.last().expect("just pushed"))
    }

    pub fn into_trajectory(self) -> Trajectory {
        Trajectory {
            densities: self.densities,
            reports: self.reports,
            horizon: self.config.horizon,
            initial_energy: self.energies[0],
        }
    }
}

/// Runs all `N` levels.
pub fn solve(config: SolverConfig) -> Result<Trajectory> {
    let steps = config.steps;
    let mut solver = JkoSolver::new(config)?;
    for _ in 0..steps {
        solver.step()?;
    }
    Ok(solver.into_trajectory())
}
