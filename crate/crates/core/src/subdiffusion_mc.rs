//! Monte-Carlo simulation of subdiffusion.
//!
//! The time-changed process `Y(t) = X(S_alpha(t))` combines overdamped
//! Langevin dynamics `dX = -grad Psi(X) dt + sqrt(2) dW`, reflected at the
//! boundary of the unit interval or square, with the inverse `S_alpha` of an
//! `alpha`-stable subordinator `U_alpha` (`E exp(-k U_alpha(s)) = exp(-s k^alpha)`).
//! Endpoint histograms of `Y(T)` are an independent check on the PDE solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::grid::{DiscreteDensity, SpatialGrid};

/// Exact one-sided stable sample with `E exp(-k S) = exp(-k^alpha)`.
///
/// Kanter's representation: with `theta ~ U(0, pi)` and `E ~ Exp(1)`,
/// `S = sin(alpha theta) / sin(theta)^{1/alpha} * (sin((1-alpha) theta) / E)^{(1-alpha)/alpha}`.
fn standard_positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    loop {
        let theta = std::f64::consts::PI * rng.random::<f64>();
        let e: f64 = Exp1.sample(rng);
        if theta <= 0.0 || e <= 0.0 {
            continue;
        }
        let a = (alpha * theta).sin() / theta.sin().powf(1.0 / alpha);
        let b = ((1.0 - alpha) * theta).sin() / e;
        let s = a * b.powf((1.0 - alpha) / alpha);
        if s > 0.0 && s.is_finite() {
            return s;
        }
    }
}

fn check_stable_order(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidOrder(alpha))
    }
}

/// Increment `U_alpha(ds)`, distributed as `ds^{1/alpha} U_alpha(1)`.
pub fn stable_increment<R: Rng + ?Sized>(alpha: f64, ds: f64, rng: &mut R) -> Result<f64> {
    check_stable_order(alpha)?;
    if !(ds > 0.0 && ds.is_finite()) {
        return Err(Error::InvalidTimeStep(ds));
    }
    Ok(ds.powf(1.0 / alpha) * standard_positive_stable(alpha, rng))
}

/// Operational time `S_alpha(t) = inf { s : U_alpha(s) > t }`.
///
/// Accumulates increments on the `ds` grid until the running sum passes `t`
/// and interpolates linearly inside the crossing step.
pub fn first_passage_time<R: Rng + ?Sized>(alpha: f64, t: f64, ds: f64, rng: &mut R) -> Result<f64> {
    check_stable_order(alpha)?;
    if !(ds > 0.0 && ds.is_finite()) {
        return Err(Error::InvalidTimeStep(ds));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidConfig(format!("passage level {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let scale = ds.powf(1.0 / alpha);
    let mut level = 0.0;
    let mut steps = 0usize;
    loop {
        let inc = scale * standard_positive_stable(alpha, rng);
        if level + inc > t {
            return Ok(ds * (steps as f64 + (t - level) / inc));
        }
        level += inc;
        steps += 1;
    }
}

/// First-passage times for an increasing list of levels along one
/// subordinator path.
pub fn first_passage_times<R: Rng + ?Sized>(
    alpha: f64,
    levels: &[f64],
    ds: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_stable_order(alpha)?;
    if !(ds > 0.0 && ds.is_finite()) {
        return Err(Error::InvalidTimeStep(ds));
    }
    if levels.windows(2).any(|w| w[1] < w[0]) || levels.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidConfig("levels must be nonnegative and sorted".into()));
    }
    let scale = ds.powf(1.0 / alpha);
    let mut out = Vec::with_capacity(levels.len());
    let (mut level, mut steps) = (0.0, 0usize);
    let mut pending = scale * standard_positive_stable(alpha, rng);
    for &t in levels {
        if t == 0.0 {
            out.push(0.0);
            continue;
        }
        while level + pending <= t {
            level += pending;
            steps += 1;
            pending = scale * standard_positive_stable(alpha, rng);
        }
        out.push(ds * (steps as f64 + (t - level) / pending));
    }
    Ok(out)
}

/// Settings for endpoint simulation.
#[derive(Debug, Clone)]
pub struct McConfig {
    /// `alpha = 1` disables the time change.
    pub alpha: f64,
    pub horizon: f64,
    /// Subordinator grid step.
    pub ds: f64,
    /// Euler-Maruyama step in operational time.
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    pub grid: SpatialGrid,
    pub forcing: Forcing,
}

impl McConfig {
    /// `ds = dt = 1e-3`.
    pub fn new(alpha: f64, horizon: f64, paths: usize, seed: u64, grid: SpatialGrid, forcing: Forcing) -> Result<Self> {
        let cfg = Self {
            alpha,
            horizon,
            ds: 1e-3,
            dt: 1e-3,
            paths,
            seed,
            grid,
            forcing,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidOrder(self.alpha));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!("horizon {}", self.horizon)));
        }
        if !(self.ds > 0.0 && self.dt > 0.0) {
            return Err(Error::InvalidConfig("ds and dt must be positive".into()));
        }
        if self.paths == 0 {
            return Err(Error::InvalidConfig("need at least one path".into()));
        }
        if self.forcing.dim() != self.grid.dim() {
            return Err(Error::InvalidConfig(format!(
                "forcing {} does not match a {}D grid",
                self.forcing,
                self.grid.dim()
            )));
        }
        Ok(())
    }
}

/// Independent stream for path `index`: same seed, distinct ChaCha stream.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Folds a coordinate back into `[0, 1]` by mirror reflection.
#[inline]
pub fn reflect_unit(mut x: f64) -> f64 {
    loop {
        if x < 0.0 {
            x = -x;
        } else if x > 1.0 {
            x = 2.0 - x;
        } else {
            return x;
        }
    }
}

/// Position `Y(T)` of one path started from the uniform density.
pub fn simulate_endpoint<R: Rng + ?Sized>(config: &McConfig, rng: &mut R) -> [f64; 2] {
    let dim = config.grid.dim();
    let mut x = [0.0; 2];
    for xi in x.iter_mut().take(dim) {
        *xi = rng.random::<f64>();
    }
    let clock = if config.alpha >= 1.0 {
        config.horizon
    } else {
        first_passage_time(config.alpha, config.horizon, config.ds, rng)
            .expect("validated configuration")
    };
    let full = (clock / config.dt).floor() as usize;
    let rest = clock - full as f64 * config.dt;
    let advance = |x: &mut [f64; 2], dt: f64, rng: &mut R| {
        let grad = config.forcing.gradient(&x[..dim]);
        let noise = (2.0 * dt).sqrt();
        for k in 0..dim {
            let z: f64 = StandardNormal.sample(rng);
            x[k] = reflect_unit(x[k] - grad[k] * dt + noise * z);
        }
    };
    for _ in 0..full {
        advance(&mut x, config.dt, rng);
    }
    if rest > 0.0 {
        advance(&mut x, rest, rng);
    }
    x
}

/// Endpoints of all paths, in path order. Each path draws from its own
/// stream, so the result does not depend on the thread count.
pub fn simulate_endpoints(config: &McConfig) -> Result<Vec<[f64; 2]>> {
    config.validate()?;
    Ok((0..config.paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(config.seed, i);
            simulate_endpoint(config, &mut rng)
        })
        .collect())
}

/// Cell counts of `positions`, normalized onto the simplex.
pub fn density_histogram(positions: &[[f64; 2]], grid: &SpatialGrid) -> Result<DiscreteDensity> {
    if positions.is_empty() {
        return Err(Error::InvalidDensity("no positions to bin".into()));
    }
    let mut counts = vec![0.0; grid.len()];
    for x in positions {
        let pt = &x[..grid.dim()];
        if pt.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidDensity(format!("position {pt:?} outside the domain")));
        }
        counts[grid.locate(pt)] += 1.0;
    }
    DiscreteDensity::from_weights(*grid, counts)
}

/// Simulates all paths and bins their endpoints.
pub fn endpoint_histogram(config: &McConfig) -> Result<DiscreteDensity> {
    let endpoints = simulate_endpoints(config)?;
    density_histogram(&endpoints, &config.grid)
}
