use crate::entropic_ot::{gibbs_kernel, sinkhorn_distance, sinkhorn_from, Representation, SinkhornSolution};
use crate::error::{Error, Result};
use crate::grid::{cost_matrix, DiscreteDensity, SpatialGrid};

/// Sinkhorn tolerance and iteration cap used for W errors.
pub const W_TOLERANCE: f64 = 1e-10;
pub const W_MAX_ITER: usize = 200_000;
const ANNEAL_TOLERANCE: f64 = 1e-6;

fn check_pair(p: &DiscreteDensity, q: &DiscreteDensity) -> Result<()> {
    if p.grid() != q.grid() {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", p.grid(), q.grid())));
    }
    Ok(())
}

/// `sum |p_i - q_i|`: the function-space L1 error, since probabilities absorb `h^d`.
pub fn l1_error(p: &DiscreteDensity, q: &DiscreteDensity) -> Result<f64> {
    check_pair(p, q)?;
    Ok(p.probs().iter().zip(q.probs()).map(|(a, b)| (a - b).abs()).sum())
}

/// `sqrt(sum (p_i - q_i)^2 / h^d)`: function-space L2 error of the piecewise
/// constant densities.
pub fn l2_error(p: &DiscreteDensity, q: &DiscreteDensity) -> Result<f64> {
    check_pair(p, q)?;
    let vol = p.grid().cell_volume();
    let ss: f64 = p.probs().iter().zip(q.probs()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((ss / vol).sqrt())
}

/// `sqrt(<C, pi*>)` for the entropic plan at `gamma_eval`.
///
/// If plain Sinkhorn stalls, the solve is repeated along a halving ladder of
/// `gamma` starting above the domain diameter, each stage warm-started from
/// the previous one.
pub fn w_error(p: &DiscreteDensity, q: &DiscreteDensity, gamma_eval: f64) -> Result<f64> {
    check_pair(p, q)?;
    let grid = p.grid();
    let cost = cost_matrix(grid);
    let kernel = gibbs_kernel(&cost, gamma_eval, Representation::auto(grid, gamma_eval))?;
    let sol = match sinkhorn_distance(p, q, &kernel, W_TOLERANCE, W_MAX_ITER) {
        Err(Error::NotConverged { .. }) => annealed(p, q, gamma_eval)?,
        other => other?,
    };
    Ok(sol.transport_cost.max(0.0).sqrt())
}

fn annealed(p: &DiscreteDensity, q: &DiscreteDensity, gamma_eval: f64) -> Result<SinkhornSolution> {
    let grid = p.grid();
    let cost = cost_matrix(grid);
    let mut ladder = vec![gamma_eval];
    while *ladder.last().expect("nonempty") < grid.dim() as f64 {
        ladder.push(ladder.last().expect("nonempty") * 2.0);
    }
    ladder.reverse();
    let mut log_b = vec![0.0; grid.len()];
    let mut prev = ladder[0];
    let mut last = None;
    for gamma in ladder {
        // same dual potential gamma * log b at the new gamma
        log_b.iter_mut().for_each(|v| *v *= prev / gamma);
        let kernel = gibbs_kernel(&cost, gamma, Representation::auto(grid, gamma))?;
        // intermediate stages only supply warm starts
        let tol = if gamma == gamma_eval { W_TOLERANCE } else { ANNEAL_TOLERANCE };
        let sol = sinkhorn_from(p, q, &kernel, tol, W_MAX_ITER, log_b)?;
        log_b = sol.log_b.clone();
        prev = gamma;
        last = Some(sol);
    }
    Ok(last.expect("ladder holds gamma_eval"))
}

/// Least-squares slope of `log(error)` against `log(tau)`, `tau = horizon / N`.
///
/// Returns `None` for fewer than two points or a nonpositive error.
pub fn fit_rate(errors: &[f64], steps: &[usize], horizon: f64) -> Option<f64> {
    if errors.len() != steps.len() || errors.len() < 2 {
        return None;
    }
    if errors.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return None;
    }
    let xs: Vec<f64> = steps.iter().map(|n| (horizon / *n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Second moment `sum p_i |x_i|^2` at cell midpoints.
pub fn second_moment(p: &DiscreteDensity, grid: &SpatialGrid) -> Result<f64> {
    p.ensure_grid(grid)?;
    Ok(p.probs()
        .iter()
        .enumerate()
        .map(|(c, w)| {
            let x = grid.midpoint(c);
            w * (x[0] * x[0] + x[1] * x[1])
        })
        .sum())
}
