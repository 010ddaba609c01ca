//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use tfjko::caputo_l1::{caputo_apply, initial_trace_term, right_caputo_apply, FractionalOrder};

/// Which marginals a 3x3 coupling must match.
pub enum Constraint<'a> {
    /// Rows sum to `q`, columns to `p`.
    Both { q: &'a [f64; 3], p: &'a [f64; 3] },
    /// Rows sum to `q`; columns are free.
    Rows { q: &'a [f64; 3] },
}

/// Minimizes `<C,pi> + gamma <pi, log pi - 1> + tau' sum_j p_j (log p_j + psi_j)`
/// over 3x3 couplings by a damped Newton method on the affine constraint set.
/// `p` is the column-sum vector of `pi`.
pub struct CouplingProblem<'a> {
    pub cost: [[f64; 3]; 3],
    pub gamma: f64,
    pub tau_prime: f64,
    pub psi: [f64; 3],
    pub constraint: Constraint<'a>,
}

impl CouplingProblem<'_> {
    pub fn objective(&self, pi: &[[f64; 3]; 3]) -> f64 {
        let mut v = 0.0;
        let mut col = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                let x = pi[i][j];
                v += self.cost[i][j] * x + self.gamma * x * (x.ln() - 1.0);
                col[j] += x;
            }
        }
        if self.tau_prime > 0.0 {
            for j in 0..3 {
                v += self.tau_prime * col[j] * (col[j].ln() + self.psi[j]);
            }
        }
        v
    }

    fn basis(&self) -> Vec<[[f64; 3]; 3]> {
        let mut out = Vec::new();
        match self.constraint {
            Constraint::Both { .. } => {
                for k in 0..2 {
                    for l in 0..2 {
                        let mut e = [[0.0; 3]; 3];
                        e[k][l] += 1.0;
                        e[k][2] -= 1.0;
                        e[2][l] -= 1.0;
                        e[2][2] += 1.0;
                        out.push(e);
                    }
                }
            }
            Constraint::Rows { .. } => {
                for k in 0..3 {
                    for l in 0..2 {
                        let mut e = [[0.0; 3]; 3];
                        e[k][l] = 1.0;
                        e[k][2] = -1.0;
                        out.push(e);
                    }
                }
            }
        }
        out
    }

    fn start(&self) -> [[f64; 3]; 3] {
        let mut pi = [[0.0; 3]; 3];
        match self.constraint {
            Constraint::Both { q, p } => {
                for i in 0..3 {
                    for j in 0..3 {
                        pi[i][j] = q[i] * p[j];
                    }
                }
            }
            Constraint::Rows { q } => {
                for i in 0..3 {
                    for j in 0..3 {
                        pi[i][j] = q[i] / 3.0;
                    }
                }
            }
        }
        pi
    }

    pub fn solve(&self) -> [[f64; 3]; 3] {
        let basis = self.basis();
        let k = basis.len();
        let mut pi = self.start();
        for _ in 0..200 {
            let mut col = [0.0; 3];
            for row in &pi {
                for j in 0..3 {
                    col[j] += row[j];
                }
            }
            let mut g = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    g[i][j] = self.cost[i][j] + self.gamma * pi[i][j].ln();
                    if self.tau_prime > 0.0 {
                        g[i][j] += self.tau_prime * (col[j].ln() + 1.0 + self.psi[j]);
                    }
                }
            }
            let hv = |e: &[[f64; 3]; 3]| {
                let mut ecol = [0.0; 3];
                for row in e {
                    for j in 0..3 {
                        ecol[j] += row[j];
                    }
                }
                let mut out = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        out[i][j] = self.gamma * e[i][j] / pi[i][j];
                        if self.tau_prime > 0.0 {
                            out[i][j] += self.tau_prime * ecol[j] / col[j];
                        }
                    }
                }
                out
            };
            let dot = |a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]| {
                (0..3).map(|i| (0..3).map(|j| a[i][j] * b[i][j]).sum::<f64>()).sum::<f64>()
            };
            let rg: Vec<f64> = basis.iter().map(|e| dot(e, &g)).collect();
            if rg.iter().map(|x| x.abs()).fold(0.0, f64::max) < 1e-15 {
                break;
            }
            let mut h = vec![vec![0.0; k]; k];
            for a in 0..k {
                let he = hv(&basis[a]);
                for b in 0..k {
                    h[a][b] = dot(&basis[b], &he);
                }
            }
            let dir = solve_linear(h, rg.iter().map(|x| -x).collect());
            let mut step = [[0.0; 3]; 3];
            for (c, e) in dir.iter().zip(&basis) {
                for i in 0..3 {
                    for j in 0..3 {
                        step[i][j] += c * e[i][j];
                    }
                }
            }
            let f0 = self.objective(&pi);
            let mut t = 1.0;
            loop {
                let mut trial = pi;
                let mut ok = true;
                for i in 0..3 {
                    for j in 0..3 {
                        trial[i][j] += t * step[i][j];
                        ok &= trial[i][j] > 0.0;
                    }
                }
                if ok && self.objective(&trial) <= f0 + 1e-4 * t * dot(&step, &g) {
                    pi = trial;
                    break;
                }
                t *= 0.5;
                if t < 1e-20 {
                    return pi;
                }
            }
        }
        pi
    }
}

/// Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

pub fn transport(cost: &[[f64; 3]; 3], pi: &[[f64; 3]; 3]) -> f64 {
    (0..3).map(|i| (0..3).map(|j| cost[i][j] * pi[i][j]).sum::<f64>()).sum()
}

pub fn column_sums(pi: &[[f64; 3]; 3]) -> [f64; 3] {
    let mut c = [0.0; 3];
    for row in pi {
        for j in 0..3 {
            c[j] += row[j];
        }
    }
    c
}

/// Squared-distance cost between the midpoints of a 3-cell unit grid.
pub fn midpoint_cost3() -> [[f64; 3]; 3] {
    let x: [f64; 3] = [1.0 / 6.0, 0.5, 5.0 / 6.0];
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (x[i] - x[j]).powi(2);
        }
    }
    c
}

/// Exact `W_2` between two discrete laws on the sorted points `x`, by the
/// monotone (quantile) coupling.
pub fn exact_w2_1d(p: &[f64], q: &[f64], x: &[f64]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut a, mut b) = (p[0], q[0]);
    let mut cost = 0.0;
    loop {
        let m = a.min(b);
        cost += m * (x[i] - x[j]).powi(2);
        a -= m;
        b -= m;
        if a <= 1e-15 {
            i += 1;
            if i == p.len() {
                break;
            }
            a = p[i];
        }
        if b <= 1e-15 {
            j += 1;
            if j == q.len() {
                break;
            }
            b = q[j];
        }
    }
    cost.sqrt()
}

/// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> (f64, f64) {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = n * m / (n + m);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1.0f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}

/// Gaver-Stehfest inversion of a Laplace transform at time `t`.
pub fn stehfest<F: Fn(f64) -> f64>(f: F, t: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let fact = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
    let half = n / 2;
    let ln2 = std::f64::consts::LN_2;
    let mut sum = 0.0;
    for k in 1..=n {
        let mut v = 0.0;
        for j in (k + 1) / 2..=k.min(half) {
            v += (j as f64).powi(half as i32) * fact(2 * j)
                / (fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
        }
        let sign = if (k + half) % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * v * f(k as f64 * ln2 / t);
    }
    sum * ln2 / t
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Both sides of the discrete summation-by-parts identity, with interval
/// integrals taken by the right-endpoint rule `tau * phi(t_n)`.
pub fn sbp_sides(alpha: f64, seq: &[f64], test: &[f64]) -> (f64, f64) {
    let order = FractionalOrder::new(alpha).unwrap();
    let n_big = seq.len() - 1;
    let tau = 1.0 / n_big as f64;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for n in 1..=n_big {
        lhs += tau * test[n] * caputo_apply(order, tau, &seq[..=n]).unwrap();
        rhs += tau * seq[n] * right_caputo_apply(order, tau, &test[n..], n, n_big).unwrap();
    }
    let integrals: Vec<f64> = (1..=n_big).map(|n| tau * test[n]).collect();
    rhs += seq[0] * initial_trace_term(order, tau, &integrals).unwrap();
    (lhs, rhs)
}
