use crate::error::{Error, Result};
use crate::grid::{CostMatrix, SpatialGrid};

/// `e^{-x}` underflows past this exponent.
const UNDERFLOW_EXPONENT: f64 = 700.0;

/// Dense row sums below this are recomputed in log-sum-exp form; anything
/// lost to underflow is then below `1e-15` relative.
const DENSE_GUARD: f64 = 1e-290;

/// How kernel applications are carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// Materialized `e^{-c/gamma}` factors with a max-shifted input vector;
    /// underflowing rows are redone in log-sum-exp form.
    Dense,
    /// Row-wise log-sum-exp on `-c/gamma`; never underflows.
    LogDomain,
}

impl Representation {
    /// Dense unless even neighbouring cells decouple (`h^2 / gamma` past the
    /// exponent range of `f64`). Dense applications fall back to exact
    /// log-sum-exp on rows whose sums underflow, so both choices are safe.
    pub fn auto(grid: &SpatialGrid, gamma: f64) -> Self {
        let h = grid.h();
        if h * h / gamma > UNDERFLOW_EXPONENT {
            Representation::LogDomain
        } else {
            Representation::Dense
        }
    }
}

/// One per-axis factor of the kernel, `M x M`, row-major.
#[derive(Debug, Clone)]
struct AxisFactor {
    log: Vec<f64>,
    lin: Vec<f64>,
}

impl AxisFactor {
    fn new(log: Vec<f64>) -> Self {
        let lin = log.iter().map(|v| v.exp()).collect();
        Self { log, lin }
    }
}

/// Gibbs kernel `xi = e^{-C/gamma}` for a squared Euclidean cost.
///
/// In 2D the kernel is never materialized: it is the Kronecker product of
/// two identical per-axis factors, applied one axis after the other.
/// All applications work on log-vectors, `lv -> log(xi exp(lv))`; the kernel
/// is symmetric, so the same routine serves for `xi^T`.
#[derive(Debug, Clone)]
pub struct GibbsKernel {
    grid: SpatialGrid,
    gamma: f64,
    repr: Representation,
    gibbs: AxisFactor,
    /// `c e^{-c/gamma}`, used to evaluate transport costs.
    weighted: AxisFactor,
}

impl GibbsKernel {
    pub fn new(cost: &CostMatrix, gamma: f64, repr: Representation) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidGamma(gamma));
        }
        let axis = cost.axis_cost();
        let gibbs = AxisFactor::new(axis.iter().map(|c| -c / gamma).collect());
        let weighted = AxisFactor::new(axis.iter().map(|c| c.ln() - c / gamma).collect());
        Ok(Self {
            grid: *cost.grid(),
            gamma,
            repr,
            gibbs,
            weighted,
        })
    }

    #[inline]
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn representation(&self) -> Representation {
        self.repr
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// `out = log(xi exp(lv))`.
    pub fn apply_log(&self, lv: &[f64], out: &mut [f64]) {
        self.apply_factors(lv, out, &self.gibbs, &self.gibbs);
    }

    /// `v -> xi v` on plain (non-log) vectors.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        let mut out = vec![0.0; v.len()];
        self.apply_log(&lv, &mut out);
        out.iter_mut().for_each(|x| *x = x.exp());
        out
    }

    /// Transport cost `<C, diag(a) xi diag(b)>` from log-scalings.
    pub fn transport_cost(&self, log_a: &[f64], log_b: &[f64]) -> f64 {
        let n = self.len();
        let mut tmp = vec![0.0; n];
        let mut total = 0.0;
        if self.grid.dim() == 1 {
            self.apply_factors(log_b, &mut tmp, &self.weighted, &self.weighted);
            total += sum_exp_pairs(log_a, &tmp);
        } else {
            // c = c_x + c_y: one weighted factor per axis in turn.
            self.apply_factors(log_b, &mut tmp, &self.weighted, &self.gibbs);
            total += sum_exp_pairs(log_a, &tmp);
            self.apply_factors(log_b, &mut tmp, &self.gibbs, &self.weighted);
            total += sum_exp_pairs(log_a, &tmp);
        }
        total
    }

    /// Materialized `xi` for small grids, row-major.
    pub fn dense_matrix(&self) -> Vec<f64> {
        let n = self.len();
        let m = self.grid.cells_per_axis();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = if self.grid.dim() == 1 {
                    self.gibbs.lin[i * m + j]
                } else {
                    let (ix, iy) = (i / m, i % m);
                    let (jx, jy) = (j / m, j % m);
                    (self.gibbs.log[ix * m + jx] + self.gibbs.log[iy * m + jy]).exp()
                };
                out.push(v);
            }
        }
        out
    }

    /// Applies `fx (x) fy` (or just `fx` in 1D) to `exp(lv)`, in log form.
    fn apply_factors(&self, lv: &[f64], out: &mut [f64], fx: &AxisFactor, fy: &AxisFactor) {
        let m = self.grid.cells_per_axis();
        debug_assert_eq!(lv.len(), self.len());
        debug_assert_eq!(out.len(), self.len());
        match (self.repr, self.grid.dim()) {
            (Representation::Dense, 1) => dense_1d(fx, lv, out, m),
            (Representation::Dense, _) => dense_2d(fx, fy, lv, out, m),
            (Representation::LogDomain, 1) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = log_sum_exp_row(&fx.log[i * m..(i + 1) * m], lv);
                }
            }
            (Representation::LogDomain, _) => log_2d(&fx.log, &fy.log, lv, out, m),
        }
    }
}

/// Builds the kernel for `cost` at `gamma`.
pub fn gibbs_kernel(cost: &CostMatrix, gamma: f64, repr: Representation) -> Result<GibbsKernel> {
    GibbsKernel::new(cost, gamma, repr)
}

fn sum_exp_pairs(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let s = x + y;
            if s == f64::NEG_INFINITY {
                0.0
            } else {
                s.exp()
            }
        })
        .sum()
}

fn max_finite(lv: &[f64]) -> f64 {
    lv.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `log sum_j exp(row_j + lv_j)`.
#[inline]
fn log_sum_exp_row(row: &[f64], lv: &[f64]) -> f64 {
    let mut mx = f64::NEG_INFINITY;
    for (r, v) in row.iter().zip(lv) {
        mx = mx.max(r + v);
    }
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    let mut s = 0.0;
    for (r, v) in row.iter().zip(lv) {
        s += (r + v - mx).exp();
    }
    mx + s.ln()
}

fn dense_1d(f: &AxisFactor, lv: &[f64], out: &mut [f64], m: usize) {
    let k = &f.lin;
    let shift = max_finite(lv);
    if shift == f64::NEG_INFINITY {
        out.fill(f64::NEG_INFINITY);
        return;
    }
    let v: Vec<f64> = lv.iter().map(|x| (x - shift).exp()).collect();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &k[i * m..(i + 1) * m];
        let s: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        *o = if s > DENSE_GUARD {
            s.ln() + shift
        } else {
            log_sum_exp_row(&f.log[i * m..(i + 1) * m], lv)
        };
    }
}

fn dense_2d(fx: &AxisFactor, fy: &AxisFactor, lv: &[f64], out: &mut [f64], m: usize) {
    let (kx, ky) = (&fx.lin, &fy.lin);
    let shift = max_finite(lv);
    if shift == f64::NEG_INFINITY {
        out.fill(f64::NEG_INFINITY);
        return;
    }
    let v: Vec<f64> = lv.iter().map(|x| (x - shift).exp()).collect();
    // t[jx, iy] = sum_jy ky[iy, jy] v[jx, jy]
    let mut t = vec![0.0; m * m];
    for jx in 0..m {
        let vrow = &v[jx * m..(jx + 1) * m];
        for iy in 0..m {
            let krow = &ky[iy * m..(iy + 1) * m];
            t[jx * m + iy] = krow.iter().zip(vrow).map(|(a, b)| a * b).sum();
        }
    }
    // w[ix, iy] = sum_jx kx[ix, jx] t[jx, iy]
    let mut w = vec![0.0; m * m];
    for ix in 0..m {
        let wrow = &mut w[ix * m..(ix + 1) * m];
        for jx in 0..m {
            let k = kx[ix * m + jx];
            if k == 0.0 {
                continue;
            }
            let trow = &t[jx * m..(jx + 1) * m];
            for (wv, tv) in wrow.iter_mut().zip(trow) {
                *wv += k * tv;
            }
        }
    }
    for (idx, (o, wv)) in out.iter_mut().zip(&w).enumerate() {
        *o = if *wv > DENSE_GUARD {
            wv.ln() + shift
        } else {
            log_2d_entry(&fx.log, &fy.log, lv, idx / m, idx % m, m)
        };
    }
}

/// Single output entry of the 2D application, by a full log-sum-exp.
fn log_2d_entry(kx: &[f64], ky: &[f64], lv: &[f64], ix: usize, iy: usize, m: usize) -> f64 {
    let term = |jx: usize, jy: usize| kx[ix * m + jx] + ky[iy * m + jy] + lv[jx * m + jy];
    let mut mx = f64::NEG_INFINITY;
    for jx in 0..m {
        for jy in 0..m {
            mx = mx.max(term(jx, jy));
        }
    }
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    let mut s = 0.0;
    for jx in 0..m {
        for jy in 0..m {
            s += (term(jx, jy) - mx).exp();
        }
    }
    mx + s.ln()
}

fn log_2d(kx: &[f64], ky: &[f64], lv: &[f64], out: &mut [f64], m: usize) {
    // t[jx, iy] = lse_jy (ky[iy, jy] + lv[jx, jy])
    let mut t = vec![0.0; m * m];
    for jx in 0..m {
        let vrow = &lv[jx * m..(jx + 1) * m];
        for iy in 0..m {
            t[jx * m + iy] = log_sum_exp_row(&ky[iy * m..(iy + 1) * m], vrow);
        }
    }
    // transpose so that the x-contraction also runs over contiguous memory
    let mut tt = vec![0.0; m * m];
    for jx in 0..m {
        for iy in 0..m {
            tt[iy * m + jx] = t[jx * m + iy];
        }
    }
    for ix in 0..m {
        let krow = &kx[ix * m..(ix + 1) * m];
        for iy in 0..m {
            out[ix * m + iy] = log_sum_exp_row(krow, &tt[iy * m..(iy + 1) * m]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, cost_matrix};

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn rejects_nonpositive_gamma() {
        let c = cost_matrix(&build_grid(1, 4).unwrap());
        assert!(gibbs_kernel(&c, 0.0, Representation::Dense).is_err());
        assert!(gibbs_kernel(&c, -1.0, Representation::LogDomain).is_err());
        assert!(gibbs_kernel(&c, f64::INFINITY, Representation::Dense).is_err());
    }

    #[test]
    fn zero_cost_acts_as_all_ones() {
        // a single cell has zero cost; a huge gamma flattens any cost
        let g = build_grid(1, 5).unwrap();
        let k = gibbs_kernel(&cost_matrix(&g), 1e12, Representation::Dense).unwrap();
        let v = [0.1, 0.2, 0.3, 0.15, 0.25];
        for x in k.apply(&v) {
            assert!((x - 1.0).abs() < 1e-10);
        }
        let one = build_grid(1, 1).unwrap();
        let k1 = gibbs_kernel(&cost_matrix(&one), 1e-3, Representation::LogDomain).unwrap();
        assert!((k1.apply(&[0.7])[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn entries_in_unit_interval_and_symmetric() {
        let g = build_grid(2, 3).unwrap();
        let k = gibbs_kernel(&cost_matrix(&g), 0.05, Representation::Dense).unwrap();
        let d = k.dense_matrix();
        let n = g.len();
        for i in 0..n {
            assert_eq!(d[i * n + i], 1.0);
            for j in 0..n {
                assert!(d[i * n + j] > 0.0 && d[i * n + j] <= 1.0);
                assert_eq!(d[i * n + j], d[j * n + i]);
            }
        }
    }

    #[test]
    fn dense_and_log_domain_agree() {
        let g = build_grid(1, 16).unwrap();
        let c = cost_matrix(&g);
        for gamma in [1e-3, 1e-2, 1.0] {
            let kd = gibbs_kernel(&c, gamma, Representation::Dense).unwrap();
            let kl = gibbs_kernel(&c, gamma, Representation::LogDomain).unwrap();
            let lv: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64 * 0.3 - 1.0).collect();
            let (mut a, mut b) = (vec![0.0; 16], vec![0.0; 16]);
            kd.apply_log(&lv, &mut a);
            kl.apply_log(&lv, &mut b);
            for (x, y) in a.iter().zip(&b) {
                assert!(rel_close(x.exp(), y.exp(), 1e-10), "gamma {gamma}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn separable_2d_matches_materialized_kernel() {
        let g = build_grid(2, 4).unwrap();
        let c = cost_matrix(&g);
        let n = g.len();
        let v: Vec<f64> = (0..n).map(|i| 0.5 + ((i * 13) % 7) as f64 / 7.0).collect();
        for repr in [Representation::Dense, Representation::LogDomain] {
            let k = gibbs_kernel(&c, 0.07, repr).unwrap();
            let dense = c.dense();
            let got = k.apply(&v);
            for i in 0..n {
                let want: f64 = (0..n).map(|j| (-dense[i * n + j] / 0.07).exp() * v[j]).sum();
                assert!(rel_close(got[i], want, 1e-10));
            }
        }
    }

    #[test]
    fn transport_cost_matches_direct_sum() {
        for dim in [1, 2] {
            let g = build_grid(dim, 3).unwrap();
            let c = cost_matrix(&g);
            let n = g.len();
            let la: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let lb: Vec<f64> = (0..n).map(|i| (i as f64 * 0.91).cos()).collect();
            for repr in [Representation::Dense, Representation::LogDomain] {
                let k = gibbs_kernel(&c, 0.2, repr).unwrap();
                let mut direct = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let cij = c.entry(i, j);
                        direct += (la[i] + lb[j] - cij / 0.2).exp() * cij;
                    }
                }
                assert!(rel_close(k.transport_cost(&la, &lb), direct, 1e-12));
            }
        }
    }

    #[test]
    fn auto_representation_threshold() {
        let g = build_grid(1, 128).unwrap();
        assert_eq!(Representation::auto(&g, 1.0 / 1280.0), Representation::Dense);
        let g2 = build_grid(2, 32).unwrap();
        assert_eq!(Representation::auto(&g2, 1.0 / 1280.0), Representation::Dense);
        assert_eq!(Representation::auto(&g2, 1e-6), Representation::LogDomain);
    }

    #[test]
    fn dense_guard_recovers_underflowing_rows() {
        // Mass concentrated at one end: far rows of the dense product underflow.
        for dim in [1, 2] {
            let g = build_grid(dim, 16).unwrap();
            let c = cost_matrix(&g);
            let gamma = 1e-3;
            let kd = gibbs_kernel(&c, gamma, Representation::Dense).unwrap();
            let kl = gibbs_kernel(&c, gamma, Representation::LogDomain).unwrap();
            let n = g.len();
            let lv: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { -800.0 - i as f64 }).collect();
            let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
            kd.apply_log(&lv, &mut a);
            kl.apply_log(&lv, &mut b);
            for (x, y) in a.iter().zip(&b) {
                assert!(x.is_finite());
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{x} vs {y}");
            }
        }
    }
}
