//! L1 quadrature for the Caputo derivative.
//!
//! On a uniform grid `t_n = n tau` the L1 approximation of the Caputo
//! derivative of order `alpha` reads
//!
//! ```text
//! d^alpha phi(t_n) ~ C_alpha tau^{-alpha} sum_{i=0}^{n} b_{n-i}^{(n)} phi^i,   C_alpha = 1 / Gamma(2 - alpha)
//! ```
//!
//! with weights `b_0 = 1`, `b_i = (i+1)^{1-a} + (i-1)^{1-a} - 2 i^{1-a}` for
//! `1 <= i < n` and `b_n = (n-1)^{1-a} - n^{1-a}`. At `alpha = 1` the weights
//! collapse to backward Euler, `(1, -1, 0, ..., 0)`.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Interior weights past this index use a series expansion of the second
/// difference instead of the cancelling closed form.
const SERIES_THRESHOLD: usize = 1 << 20;

/// Order `alpha` of the Caputo derivative together with `C_alpha = 1/Gamma(2-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalOrder {
    alpha: f64,
    c_alpha: f64,
}

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidOrder(alpha));
        }
        let c_alpha = if alpha == 1.0 {
            1.0
        } else {
            1.0 / gamma(2.0 - alpha)
        };
        Ok(Self { alpha, c_alpha })
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn c_alpha(&self) -> f64 {
        self.c_alpha
    }

    /// `alpha == 1`: the scheme is classical backward Euler.
    #[inline]
    pub fn is_classical(&self) -> bool {
        self.alpha == 1.0
    }

    /// Exponent `1 - alpha` that appears in every weight.
    #[inline]
    fn beta(&self) -> f64 {
        1.0 - self.alpha
    }
}

/// One row `b_0^{(n)}, ..., b_n^{(n)}` of L1 weights.
#[derive(Debug, Clone, PartialEq)]
pub struct L1WeightRow {
    n: usize,
    weights: Vec<f64>,
}

impl L1WeightRow {
    pub fn level(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `b_i^{(n)}`.
    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }
}

/// Convex weights `w_i = -b_{n-i}^{(n)}`, `i = 0..n-1`, of the history combination.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryWeights {
    n: usize,
    weights: Vec<f64>,
}

impl HistoryWeights {
    pub fn level(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Interior weight `b_i` for `i >= 1`; independent of the row level `n`.
fn interior_weight(beta: f64, i: usize) -> f64 {
    if i < SERIES_THRESHOLD {
        let fi = i as f64;
        (fi + 1.0).powf(beta) + (fi - 1.0).powf(beta) - 2.0 * fi.powf(beta)
    } else {
        // (1+x)^b + (1-x)^b - 2 expanded in even powers of x = 1/i.
        let x2 = (i as f64).recip().powi(2);
        let lead = (i as f64).powf(beta) * x2 * beta * (beta - 1.0);
        let c4 = (beta - 2.0) * (beta - 3.0) / 12.0;
        let c6 = c4 * (beta - 4.0) * (beta - 5.0) / 30.0;
        lead * (1.0 + x2 * (c4 + x2 * c6))
    }
}

/// Last weight `b_n^{(n)} = (n-1)^{1-a} - n^{1-a}`.
fn last_weight(beta: f64, n: usize) -> f64 {
    let fnn = n as f64;
    if n < SERIES_THRESHOLD {
        (fnn - 1.0).powf(beta) - fnn.powf(beta)
    } else {
        // n^b ((1 - 1/n)^b - 1), evaluated without cancellation
        fnn.powf(beta) * (beta * (-fnn.recip()).ln_1p()).exp_m1()
    }
}

/// The full weight row `b^{(n)}`.
pub fn l1_weights(order: FractionalOrder, n: usize) -> Result<L1WeightRow> {
    if n == 0 {
        return Err(Error::InvalidLevel(n));
    }
    let mut weights = vec![0.0; n + 1];
    weights[0] = 1.0;
    if order.is_classical() {
        weights[1] = -1.0;
    } else {
        let beta = order.beta();
        for (i, w) in weights.iter_mut().enumerate().take(n).skip(1) {
            *w = interior_weight(beta, i);
        }
        weights[n] = last_weight(beta, n);
    }
    Ok(L1WeightRow { n, weights })
}

/// History weights `w_i = -b_{n-i}^{(n)}` for level `n`.
pub fn history_weights(order: FractionalOrder, n: usize) -> Result<HistoryWeights> {
    let row = l1_weights(order, n)?;
    let weights = (0..n).map(|i| -row.weights[n - i]).collect();
    Ok(HistoryWeights { n, weights })
}

/// Precomputed weights for every level up to `max_level`.
///
/// Interior weights do not depend on the level, so the whole triangle of
/// rows is stored in `O(max_level)` memory.
#[derive(Debug, Clone)]
pub struct WeightCache {
    order: FractionalOrder,
    /// `interior[i] = b_i` for `1 <= i < max_level`; index 0 holds `b_0 = 1`.
    interior: Vec<f64>,
    /// `last[n] = b_n^{(n)}` for `1 <= n <= max_level`.
    last: Vec<f64>,
}

impl WeightCache {
    pub fn new(order: FractionalOrder, max_level: usize) -> Result<Self> {
        if max_level == 0 {
            return Err(Error::InvalidLevel(max_level));
        }
        let beta = order.beta();
        let mut interior = vec![0.0; max_level];
        interior[0] = 1.0;
        let mut last = vec![0.0; max_level + 1];
        if order.is_classical() {
            last[1] = -1.0;
            if max_level > 1 {
                interior[1] = -1.0;
            }
        } else {
            for (i, w) in interior.iter_mut().enumerate().skip(1) {
                *w = interior_weight(beta, i);
            }
            for (n, w) in last.iter_mut().enumerate().skip(1) {
                *w = last_weight(beta, n);
            }
        }
        Ok(Self {
            order,
            interior,
            last,
        })
    }

    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    pub fn max_level(&self) -> usize {
        self.last.len() - 1
    }

    /// `b_i^{(n)}`.
    pub fn weight(&self, n: usize, i: usize) -> f64 {
        debug_assert!(i <= n && n <= self.max_level());
        if i == n {
            self.last[n]
        } else {
            self.interior[i]
        }
    }

    pub fn row(&self, n: usize) -> Result<L1WeightRow> {
        self.check(n)?;
        let weights = (0..=n).map(|i| self.weight(n, i)).collect();
        Ok(L1WeightRow { n, weights })
    }

    pub fn history(&self, n: usize) -> Result<HistoryWeights> {
        self.check(n)?;
        let weights = (0..n).map(|i| -self.weight(n, n - i)).collect();
        Ok(HistoryWeights { n, weights })
    }

    fn check(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.max_level() {
            return Err(Error::InvalidLevel(n));
        }
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTimeStep(tau))
    }
}

/// Discrete left Caputo derivative at `t_n` from samples `phi^0, ..., phi^n`.
pub fn caputo_apply(order: FractionalOrder, tau: f64, samples: &[f64]) -> Result<f64> {
    check_tau(tau)?;
    if samples.len() < 2 {
        return Err(Error::InvalidLevel(samples.len().saturating_sub(1)));
    }
    let n = samples.len() - 1;
    let row = l1_weights(order, n)?;
    let sum: f64 = samples
        .iter()
        .enumerate()
        .map(|(i, phi)| row.weights[n - i] * phi)
        .sum();
    Ok(order.c_alpha() * tau.powf(-order.alpha()) * sum)
}

/// Discrete right Caputo derivative at `t_n` from samples `phi^n, ..., phi^N`.
///
/// Computes `C_alpha tau^{-alpha} sum_{j=n}^{N} b_{j-n}^{(N-n)} phi^j`. When
/// `n == N` the operator has no memory and returns zero.
pub fn right_caputo_apply(
    order: FractionalOrder,
    tau: f64,
    samples: &[f64],
    n: usize,
    big_n: usize,
) -> Result<f64> {
    check_tau(tau)?;
    if n == 0 || n > big_n {
        return Err(Error::LevelOutOfRange { n, big_n });
    }
    let m = big_n - n;
    if samples.len() != m + 1 {
        return Err(Error::SampleCount {
            expected: m + 1,
            got: samples.len(),
        });
    }
    if m == 0 {
        return Ok(0.0);
    }
    let row = l1_weights(order, m)?;
    let sum: f64 = row
        .weights
        .iter()
        .zip(samples)
        .map(|(b, phi)| b * phi)
        .sum();
    Ok(order.c_alpha() * tau.powf(-order.alpha()) * sum)
}

/// Initial-trace term `C_alpha tau^{-alpha} sum_{n=1}^N b_n^{(n)} int_{t_{n-1}}^{t_n} phi`.
///
/// `interval_integrals[n-1]` holds the integral of the test function over the
/// `n`-th time interval. As `tau -> 0` this tends to
/// `-(1/Gamma(1-alpha)) int_0^T t^{-alpha} phi(t) dt`.
pub fn initial_trace_term(order: FractionalOrder, tau: f64, interval_integrals: &[f64]) -> Result<f64> {
    check_tau(tau)?;
    if interval_integrals.is_empty() {
        return Err(Error::InvalidLevel(0));
    }
    let beta = order.beta();
    let sum: f64 = interval_integrals
        .iter()
        .enumerate()
        .map(|(k, integral)| {
            let n = k + 1;
            let b_last = if order.is_classical() {
                if n == 1 {
                    -1.0
                } else {
                    0.0
                }
            } else {
                last_weight(beta, n)
            };
            b_last * integral
        })
        .sum();
    Ok(order.c_alpha() * tau.powf(-order.alpha()) * sum)
}

/// [`initial_trace_term`] for a test function on `[0, horizon]` with `steps`
/// intervals, each integrated by the midpoint rule.
pub fn initial_trace_term_midpoint<F: Fn(f64) -> f64>(
    order: FractionalOrder,
    horizon: f64,
    steps: usize,
    phi: F,
) -> Result<f64> {
    if steps == 0 {
        return Err(Error::InvalidLevel(0));
    }
    let tau = horizon / steps as f64;
    let integrals: Vec<f64> = (0..steps)
        .map(|k| tau * phi((k as f64 + 0.5) * tau))
        .collect();
    initial_trace_term(order, tau, &integrals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(alpha: f64) -> FractionalOrder {
        FractionalOrder::new(alpha).unwrap()
    }

    #[test]
    fn rejects_bad_orders_and_levels() {
        assert!(FractionalOrder::new(0.0).is_err());
        assert!(FractionalOrder::new(1.2).is_err());
        assert!(FractionalOrder::new(f64::NAN).is_err());
        assert!(l1_weights(order(0.5), 0).is_err());
        assert!(history_weights(order(0.5), 0).is_err());
    }

    #[test]
    fn c_alpha_is_one_at_classical_limit() {
        assert_eq!(order(1.0).c_alpha(), 1.0);
        // 1/Gamma(1.5) = 2/sqrt(pi)
        let expected = 2.0 / std::f64::consts::PI.sqrt();
        assert!((order(0.5).c_alpha() - expected).abs() < 1e-14);
    }

    #[test]
    fn backward_euler_weights() {
        assert_eq!(l1_weights(order(1.0), 3).unwrap().weights(), &[1.0, -1.0, 0.0, 0.0]);
        assert_eq!(l1_weights(order(1.0), 1).unwrap().weights(), &[1.0, -1.0]);
        assert_eq!(
            history_weights(order(1.0), 5).unwrap().weights(),
            &[0.0, 0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn half_order_second_row() {
        let row = l1_weights(order(0.5), 2).unwrap();
        let s2 = 2f64.sqrt();
        assert_eq!(row.get(0), 1.0);
        assert!((row.get(1) - (s2 - 2.0)).abs() < 1e-15);
        assert!((row.get(2) - (1.0 - s2)).abs() < 1e-15);
        assert!(row.weights().iter().sum::<f64>().abs() < 1e-15);

        let hist = history_weights(order(0.5), 2).unwrap();
        assert!((hist.weights()[0] - 0.414_213_562_373_095).abs() < 1e-12);
        assert!((hist.weights()[1] - 0.585_786_437_626_905).abs() < 1e-12);
    }

    #[test]
    fn first_level_history_is_the_initial_datum() {
        for alpha in [0.1, 0.5, 0.9, 1.0] {
            assert_eq!(history_weights(order(alpha), 1).unwrap().weights(), &[1.0]);
        }
    }

    #[test]
    fn cache_matches_direct_rows() {
        for alpha in [0.3, 0.75, 1.0] {
            let cache = WeightCache::new(order(alpha), 40).unwrap();
            for n in 1..=40 {
                assert_eq!(cache.row(n).unwrap(), l1_weights(order(alpha), n).unwrap());
                assert_eq!(cache.history(n).unwrap(), history_weights(order(alpha), n).unwrap());
            }
            assert!(cache.row(41).is_err());
        }
    }

    #[test]
    fn series_branch_is_continuous_with_closed_form() {
        let beta = 0.4;
        let i = SERIES_THRESHOLD;
        let series = interior_weight(beta, i);
        // difference of first differences, each computed without cancellation
        let fi = i as f64;
        let up = fi.powf(beta) * (beta * fi.recip().ln_1p()).exp_m1();
        let down = -fi.powf(beta) * (beta * (-fi.recip()).ln_1p()).exp_m1();
        let direct = up - down;
        assert!(series < 0.0);
        assert!(((series - direct) / series).abs() < 1e-8);
        let leading = beta * (beta - 1.0) * fi.powf(beta - 2.0);
        assert!(((series - leading) / leading).abs() < 1e-10);
    }

    #[test]
    fn caputo_of_constants_vanishes() {
        let samples = vec![3.5; 11];
        let v = caputo_apply(order(0.4), 0.1, &samples).unwrap();
        assert!(v.abs() < 1e-12);
        let r = right_caputo_apply(order(0.4), 0.1, &samples, 2, 12).unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn classical_backward_difference() {
        let tau = 0.25;
        let v = caputo_apply(order(1.0), tau, &[0.0, tau]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn l1_is_exact_on_linear_functions() {
        // t -> t has Caputo derivative t^{1-a}/Gamma(2-a); L1 interpolates it exactly.
        let a = order(0.35);
        let tau = 0.05;
        let samples: Vec<f64> = (0..=20).map(|i| i as f64 * tau).collect();
        let v = caputo_apply(a, tau, &samples).unwrap();
        let exact = 1.0f64.powf(1.0 - a.alpha()) * a.c_alpha();
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn right_operator_mirrors_left() {
        let a = order(0.6);
        let tau = 0.1;
        let big_n = 9;
        let n = 3;
        let phi: Vec<f64> = (0..=big_n).map(|j| ((j as f64) * 0.7).sin()).collect();
        let right = right_caputo_apply(a, tau, &phi[n..], n, big_n).unwrap();
        let reversed: Vec<f64> = phi[n..].iter().rev().copied().collect();
        let left = caputo_apply(a, tau, &reversed).unwrap();
        assert!((right - left).abs() < 1e-12);
    }

    #[test]
    fn right_operator_rejects_bad_levels() {
        let a = order(0.6);
        assert!(right_caputo_apply(a, 0.1, &[1.0], 4, 3).is_err());
        assert!(right_caputo_apply(a, 0.1, &[1.0, 2.0], 0, 1).is_err());
        assert!(right_caputo_apply(a, 0.1, &[1.0], 1, 3).is_err());
        assert_eq!(right_caputo_apply(a, 0.1, &[5.0], 3, 3).unwrap(), 0.0);
    }

    #[test]
    fn right_operator_on_decreasing_line() {
        // phi(t) = T - t: right Caputo derivative is (T - t)^{1-a} / Gamma(2-a).
        let a = order(0.7);
        let big_n = 16;
        let tau = 1.0 / big_n as f64;
        let phi: Vec<f64> = (0..=big_n).map(|j| 1.0 - j as f64 * tau).collect();
        for n in 1..big_n {
            let v = right_caputo_apply(a, tau, &phi[n..], n, big_n).unwrap();
            let exact = a.c_alpha() * (1.0 - n as f64 * tau).powf(1.0 - a.alpha());
            assert!((v - exact).abs() < 1e-12, "n = {n}: {v} vs {exact}");
        }
    }

    #[test]
    fn initial_trace_of_zero_and_one() {
        let a = order(0.3);
        assert_eq!(initial_trace_term_midpoint(a, 1.0, 10, |_| 0.0).unwrap(), 0.0);
        // For phi = 1 the sum telescopes: exactly -T^{1-a}/Gamma(2-a).
        let v = initial_trace_term_midpoint(a, 1.0, 37, |_| 1.0).unwrap();
        assert!((v + a.c_alpha()).abs() < 1e-12);
    }

    #[test]
    fn telescoping_last_weights() {
        for alpha in [0.2, 0.5, 0.8] {
            let a = order(alpha);
            let mut acc = 0.0;
            for k in 1..=64 {
                acc -= l1_weights(a, k).unwrap().get(k);
                assert!((acc - (k as f64).powf(1.0 - alpha)).abs() < 1e-12);
            }
        }
    }
}
