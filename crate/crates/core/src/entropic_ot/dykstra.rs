//! Dykstra iterations for one entropic JKO step.
//!
//! Minimizes `KL(pi | xi) + phi_1(pi) + phi_2(pi)` over couplings, where
//! `phi_1` pins the column marginal to `q` and
//! `phi_2(pi) = sigma f(pi 1)` with `f(p) = <p, log p - 1 + psi>` and
//! `sigma = tau' / gamma`. Odd iterations project onto the column
//! constraint, even iterations take the KL proximal step of `phi_2`, and the
//! correction vectors `u, v` carry the Dykstra memory from two iterations
//! back. Everything is stored in log form.

use crate::error::{Error, Result};
use crate::grid::{DiscreteDensity, Potential};

use super::kernel::GibbsKernel;
use super::sinkhorn::{log_vec, marginal_violation, scaled};

/// Closed-form `Prox^{KL}_{sigma f}(q) = q^{1/(1+sigma)} e^{-sigma psi/(1+sigma)}`.
pub fn kl_prox(q: &[f64], sigma: f64, psi: &Potential) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidSigma(sigma));
    }
    if q.len() != psi.values().len() {
        return Err(Error::GridMismatch(format!(
            "{} values for a potential on {} cells",
            q.len(),
            psi.values().len()
        )));
    }
    if let Some(bad) = q.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::InvalidDensity(format!("prox input {bad} is negative")));
    }
    let inv = 1.0 / (1.0 + sigma);
    Ok(q.iter()
        .zip(psi.values())
        .map(|(&x, &s)| {
            if x == 0.0 {
                0.0
            } else {
                (inv * x.ln() - sigma * inv * s).exp()
            }
        })
        .collect())
}

#[inline]
fn log_prox(log_q: f64, sigma: f64, psi: f64) -> f64 {
    if log_q == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        (log_q - sigma * psi) / (1.0 + sigma)
    }
}

/// `x - y`, with `-inf - -inf = 0`.
#[inline]
fn log_ratio(x: f64, y: f64) -> f64 {
    if x == y {
        0.0
    } else {
        x - y
    }
}

/// Tolerances and limits for [`dykstra_jko_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DykstraParams {
    /// l1 tolerance on the column-marginal violation.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl DykstraParams {
    pub const DEFAULT_MAX_ITER: usize = 5000;

    /// `eps = 1e-8 M`, `L = 5000`, where `M` is the number of cells.
    pub fn for_cells(cells: usize) -> Self {
        Self {
            tolerance: 1e-8 * cells as f64,
            max_iter: Self::DEFAULT_MAX_ITER,
        }
    }
}

/// Log-scalings `a, b` and Dykstra corrections `u, v` of one step.
///
/// Corrections are kept per parity of the iteration counter, since
/// iteration `l` reads the values written at `l - 2`.
#[derive(Debug, Clone)]
pub struct ScalingState {
    pub log_a: Vec<f64>,
    pub log_b: Vec<f64>,
    log_u: [Vec<f64>; 2],
    log_v: [Vec<f64>; 2],
    pub iteration: usize,
}

impl ScalingState {
    /// `a = b = u = v = 1`, including the `l = -1` corrections.
    pub fn new(cells: usize) -> Self {
        Self {
            log_a: vec![0.0; cells],
            log_b: vec![0.0; cells],
            log_u: [vec![0.0; cells], vec![0.0; cells]],
            log_v: [vec![0.0; cells], vec![0.0; cells]],
            iteration: 0,
        }
    }
}

/// Result of one JKO step.
#[derive(Debug, Clone)]
pub struct DykstraOutcome {
    pub density: DiscreteDensity,
    pub iterations: usize,
    /// Column-marginal violation at exit.
    pub violation: f64,
    /// Total mass of the prox output before renormalization.
    pub raw_mass: f64,
    pub state: ScalingState,
}

/// One entropic JKO step from the history combination `q_bar`.
///
/// `tau_prime = 2 tau^alpha / C_alpha`; the proximal parameter is
/// `tau_prime / gamma`. The returned density is the prox output of the last
/// even iteration, divided by its sum.
pub fn dykstra_jko_step(
    q_bar: &DiscreteDensity,
    kernel: &GibbsKernel,
    psi: &Potential,
    tau_prime: f64,
    params: DykstraParams,
) -> Result<DykstraOutcome> {
    q_bar.ensure_grid(kernel.grid())?;
    psi.ensure_grid(kernel.grid())?;
    if !(tau_prime > 0.0 && tau_prime.is_finite()) {
        return Err(Error::InvalidTimeStep(tau_prime));
    }
    let n = kernel.len();
    let sigma = tau_prime / kernel.gamma();
    if n == 1 {
        return Ok(DykstraOutcome {
            density: DiscreteDensity::from_raw(*kernel.grid(), vec![1.0]),
            iterations: 0,
            violation: 0.0,
            raw_mass: 1.0,
            state: ScalingState::new(1),
        });
    }

    let q = q_bar.probs();
    let log_q = log_vec(q);
    let psi = psi.values();
    let mut st = ScalingState::new(n);
    let mut new_a = vec![0.0; n];
    let mut new_b = vec![0.0; n];
    let mut k_a = vec![0.0; n];
    let mut k_b = vec![0.0; n];
    let mut log_p = vec![0.0; n];
    let mut violation = f64::INFINITY;

    for l in 1..=params.max_iter {
        let par = l % 2;
        if par == 1 {
            // a <- a u^{l-2},  b <- q / xi^T a
            for i in 0..n {
                new_a[i] = st.log_a[i] + st.log_u[par][i];
            }
            kernel.apply_log(&new_a, &mut k_a);
            for j in 0..n {
                new_b[j] = scaled(log_q[j], k_a[j]);
            }
        } else {
            // b <- b v^{l-2},  p <- prox(a u^{l-2} xi b),  a <- p / xi b
            for j in 0..n {
                new_b[j] = st.log_b[j] + st.log_v[par][j];
            }
            kernel.apply_log(&new_b, &mut k_b);
            for i in 0..n {
                let input = st.log_a[i] + st.log_u[par][i] + k_b[i];
                log_p[i] = log_prox(input, sigma, psi[i]);
                new_a[i] = scaled(log_p[i], k_b[i]);
            }
        }
        for i in 0..n {
            st.log_u[par][i] += log_ratio(st.log_a[i], new_a[i]);
            st.log_v[par][i] += log_ratio(st.log_b[i], new_b[i]);
        }
        std::mem::swap(&mut st.log_a, &mut new_a);
        std::mem::swap(&mut st.log_b, &mut new_b);
        st.iteration = l;

        if par == 0 {
            kernel.apply_log(&st.log_a, &mut k_a);
            violation = marginal_violation(&st.log_b, &k_a, q);
            if violation < params.tolerance {
                let p: Vec<f64> = log_p
                    .iter()
                    .map(|x| if *x == f64::NEG_INFINITY { 0.0 } else { x.exp() })
                    .collect();
                let raw_mass: f64 = p.iter().sum();
                let density =
                    DiscreteDensity::from_raw(*kernel.grid(), p.iter().map(|x| x / raw_mass).collect());
                return Ok(DykstraOutcome {
                    density,
                    iterations: l,
                    violation,
                    raw_mass,
                    state: st,
                });
            }
        }
        if violation.is_nan() {
            break;
        }
    }
    Err(Error::NotConverged {
        solver: "dykstra",
        iterations: st.iteration,
        violation,
    })
}
