use crate::error::{Error, Result};
use crate::grid::DiscreteDensity;

use super::kernel::GibbsKernel;

/// Converged Sinkhorn scalings and the transport cost of the plan they define.
#[derive(Debug, Clone)]
pub struct SinkhornSolution {
    /// `<C, pi*>` for `pi* = diag(a) xi diag(b)`; the entropy term is excluded.
    pub transport_cost: f64,
    /// Full entropic objective `<C, pi> + gamma <pi, log pi - 1>`.
    pub entropic_cost: f64,
    pub log_a: Vec<f64>,
    pub log_b: Vec<f64>,
    pub iterations: usize,
    /// l1 violation of the row marginal at exit.
    pub violation: f64,
}

pub(crate) fn log_vec(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.ln()).collect()
}

/// l1 distance between `exp(log_scale + log_applied)` and `target`.
pub(crate) fn marginal_violation(log_scale: &[f64], log_applied: &[f64], target: &[f64]) -> f64 {
    log_scale
        .iter()
        .zip(log_applied)
        .zip(target)
        .map(|((s, k), t)| {
            let x = s + k;
            let m = if x == f64::NEG_INFINITY { 0.0 } else { x.exp() };
            (m - t).abs()
        })
        .sum()
}

/// Entropic optimal transport between `p` and `q` by alternating scalings
/// `a <- p / xi b`, `b <- q / xi^T a`.
pub fn sinkhorn_distance(
    p: &DiscreteDensity,
    q: &DiscreteDensity,
    kernel: &GibbsKernel,
    tolerance: f64,
    max_iter: usize,
) -> Result<SinkhornSolution> {
    sinkhorn_from(p, q, kernel, tolerance, max_iter, vec![0.0; kernel.len()])
}

/// [`sinkhorn_distance`] started from the column scaling `log_b`.
pub fn sinkhorn_from(
    p: &DiscreteDensity,
    q: &DiscreteDensity,
    kernel: &GibbsKernel,
    tolerance: f64,
    max_iter: usize,
    mut log_b: Vec<f64>,
) -> Result<SinkhornSolution> {
    p.ensure_grid(kernel.grid())?;
    q.ensure_grid(kernel.grid())?;
    let n = kernel.len();
    if log_b.len() != n {
        return Err(Error::SampleCount {
            expected: n,
            got: log_b.len(),
        });
    }
    let log_p = log_vec(p.probs());
    let log_q = log_vec(q.probs());
    let mut log_a = vec![0.0; n];
    let mut kb = vec![0.0; n];
    let mut ka = vec![0.0; n];
    let mut violation = f64::INFINITY;

    for iter in 1..=max_iter {
        kernel.apply_log(&log_b, &mut kb);
        for i in 0..n {
            log_a[i] = scaled(log_p[i], kb[i]);
        }
        kernel.apply_log(&log_a, &mut ka);
        for j in 0..n {
            log_b[j] = scaled(log_q[j], ka[j]);
        }
        kernel.apply_log(&log_b, &mut kb);
        violation = marginal_violation(&log_a, &kb, p.probs());
        if violation < tolerance {
            let transport_cost = kernel.transport_cost(&log_a, &log_b);
            let entropic_cost =
                transport_cost + kernel.gamma() * plan_entropy(kernel, &log_a, &log_b, transport_cost);
            return Ok(SinkhornSolution {
                transport_cost,
                entropic_cost,
                log_a,
                log_b,
                iterations: iter,
                violation,
            });
        }
    }
    Err(Error::NotConverged {
        solver: "sinkhorn",
        iterations: max_iter,
        violation,
    })
}

/// `log(target) - log(applied)` with `0 / x = 0`.
#[inline]
pub(crate) fn scaled(log_target: f64, log_applied: f64) -> f64 {
    if log_target == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        log_target - log_applied
    }
}

/// `<pi, log pi - 1>` for `pi = diag(a) xi diag(b)`.
///
/// With `log pi_ij = log a_i + log b_j - c_ij / gamma` this equals
/// `<r, log a> + <s, log b> - <C, pi>/gamma - mass`, where `r, s` are the
/// plan marginals.
fn plan_entropy(kernel: &GibbsKernel, log_a: &[f64], log_b: &[f64], transport_cost: f64) -> f64 {
    let n = kernel.len();
    let mut kb = vec![0.0; n];
    let mut ka = vec![0.0; n];
    kernel.apply_log(log_b, &mut kb);
    kernel.apply_log(log_a, &mut ka);
    let mut total = 0.0;
    let mut mass = 0.0;
    for i in 0..n {
        let r = exp_or_zero(log_a[i] + kb[i]);
        if r > 0.0 {
            total += r * log_a[i];
        }
        mass += r;
        let s = exp_or_zero(log_b[i] + ka[i]);
        if s > 0.0 {
            total += s * log_b[i];
        }
    }
    total - transport_cost / kernel.gamma() - mass
}

#[inline]
fn exp_or_zero(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        0.0
    } else {
        x.exp()
    }
}
