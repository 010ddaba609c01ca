mod common;

use common::{column_sums, exact_w2_1d, midpoint_cost3, transport, Constraint, CouplingProblem};
use tfjko::entropic_ot::{dykstra_jko_step, gibbs_kernel, sinkhorn_distance, DykstraParams, Representation};
use tfjko::experiments::w_error;
use tfjko::grid::{build_grid, cost_matrix, DiscreteDensity, Potential};

#[test]
fn sinkhorn_matches_newton_coupling_on_three_cells() {
    let g = build_grid(1, 3).unwrap();
    let p = [0.5, 0.25, 0.25];
    let q = [0.25, 0.25, 0.5];
    let gamma = 0.1;
    let oracle = CouplingProblem {
        cost: midpoint_cost3(),
        gamma,
        tau_prime: 0.0,
        psi: [0.0; 3],
        constraint: Constraint::Both { q: &p, p: &q },
    };
    let pi = oracle.solve();
    for repr in [Representation::Dense, Representation::LogDomain] {
        let k = gibbs_kernel(&cost_matrix(&g), gamma, repr).unwrap();
        let sol = sinkhorn_distance(
            &DiscreteDensity::new(g, p.to_vec()).unwrap(),
            &DiscreteDensity::new(g, q.to_vec()).unwrap(),
            &k,
            1e-13,
            100_000,
        )
        .unwrap();
        assert!((sol.transport_cost - transport(&oracle.cost, &pi)).abs() < 1e-6);
        assert!((sol.entropic_cost - oracle.objective(&pi)).abs() < 1e-6);
    }
}

#[test]
fn dykstra_step_matches_newton_minimizer_on_three_cells() {
    let g = build_grid(1, 3).unwrap();
    let (gamma, tau_prime) = (0.05, 0.1);
    let psi = [0.0, 0.5, 1.0];
    let q = [1.0 / 3.0; 3];
    let full = CouplingProblem {
        cost: midpoint_cost3(),
        gamma,
        tau_prime,
        psi,
        constraint: Constraint::Rows { q: &q },
    };
    let best = full.solve();
    let best_value = full.objective(&best);

    let k = gibbs_kernel(&cost_matrix(&g), gamma, Representation::Dense).unwrap();
    let params = DykstraParams {
        tolerance: 1e-12,
        max_iter: 100_000,
    };
    let out = dykstra_jko_step(
        &DiscreteDensity::uniform(g),
        &k,
        &Potential::new(g, psi.to_vec()).unwrap(),
        tau_prime,
        params,
    )
    .unwrap();
    let p: [f64; 3] = out.density.probs().try_into().unwrap();
    // value of the returned density: best coupling with both marginals fixed
    let inner = CouplingProblem {
        constraint: Constraint::Both { q: &q, p: &p },
        ..full
    };
    let value = inner.objective(&inner.solve());
    assert!((value - best_value).abs() < 1e-6, "{value} vs {best_value}");
    let oracle_p = column_sums(&best);
    for j in 0..3 {
        assert!((p[j] - oracle_p[j]).abs() < 1e-6);
    }
}

#[test]
fn entropic_w_is_close_to_exact_quantile_w() {
    let g = build_grid(1, 3).unwrap();
    let x = g.axis_midpoints();
    let cases = [
        ([0.5, 0.25, 0.25], [0.25, 0.25, 0.5]),
        ([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
        ([0.2, 0.3, 0.5], [0.6, 0.1, 0.3]),
    ];
    for (p, q) in cases {
        let exact = exact_w2_1d(&p, &q, &x);
        for gamma in [1e-1, 3e-2, 1e-3, 1e-4] {
            let w = w_error(
                &DiscreteDensity::new(g, p.to_vec()).unwrap(),
                &DiscreteDensity::new(g, q.to_vec()).unwrap(),
                gamma,
            )
            .unwrap();
            assert!((w - exact).abs() <= 3.0 * gamma.sqrt(), "{w} vs {exact} at {gamma}");
        }
    }
}

#[test]
fn quantile_oracle_sanity() {
    let x = [0.0, 1.0, 2.0];
    assert_eq!(exact_w2_1d(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &x), 2.0);
    assert!(exact_w2_1d(&[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5], &x).abs() < 1e-15);
}
