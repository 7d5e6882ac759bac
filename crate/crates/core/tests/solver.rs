use mfbm::fractional_kernels::constants;
use mfbm::ie_solver::{
    bracket_from_diagonal_p, g_limit, solve_g, solve_g_dot, solve_g_eps, solve_g_family, Grid,
};
use proptest::prelude::*;

fn sup_on_shared_nodes(coarse: &[f64], fine: &[f64]) -> f64 {
    coarse.iter().enumerate().map(|(i, c)| (c - fine[2 * i]).abs()).fold(0.0, f64::max)
}

#[test]
fn refinement_contracts() {
    for h in [0.6, 0.75, 0.9] {
        let cols: Vec<_> = [128, 256, 512].iter().map(|&n| solve_g(h, 1.0, n).unwrap()).collect();
        let d1 = sup_on_shared_nodes(&cols[0].g, &cols[1].g);
        let d2 = sup_on_shared_nodes(&cols[1].g, &cols[2].g);
        assert!(d1 / d2 >= 1.5, "H={h}: {d1:e} then {d2:e}");
    }
}

#[test]
fn diagonal_tends_to_one_at_small_times() {
    let g = solve_g(0.7, 1e-3, 64).unwrap();
    assert!((g.g_diag - 1.0).abs() <= 0.05, "{}", g.g_diag);
}

#[test]
fn diagonal_is_positive() {
    for k in 0..5 {
        let h = 0.55 + 0.1 * k as f64;
        let f = solve_g_family(h, 1.0, 128).unwrap();
        assert!(f.g_diag.iter().all(|&d| d > 0.0), "H={h}");
    }
}

#[test]
fn column_is_symmetric_at_fine_resolution() {
    for h in [0.3, 0.7] {
        let c = solve_g(h, 1.0, 512).unwrap();
        for i in 0..=512 {
            assert!((c.g[i] - c.g[512 - i]).abs() <= 1e-6);
        }
    }
}

/// Discrete L² norm of ∂_t g(·, 1) at interior nodes for n = 64, 128, 256, 512.
fn g_dot_norms(h: f64) -> Vec<f64> {
    [64usize, 128, 256, 512]
        .iter()
        .map(|&n| {
            let f = solve_g_family(h, 1.0, n).unwrap();
            let gd = solve_g_dot(&f, n).unwrap();
            (gd[1..].iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt()
        })
        .collect()
}

#[test]
fn time_derivative_square_integrable_only_above_three_quarters() {
    // increments of the norm sequence shrink when ∂_t g ∈ L² and grow when it is not
    let inc = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
    let tame = inc(&g_dot_norms(0.8));
    assert!(tame.windows(2).all(|w| w[1] < w[0]), "{tame:?}");
    let wild = inc(&g_dot_norms(0.6));
    assert!(wild.windows(2).all(|w| w[1] > w[0] && w[0] > 0.0), "{wild:?}");
}

#[test]
fn bracket_agrees_with_diagonal_p_route() {
    for t in [0.5, 1.0] {
        let g = solve_g(0.3, t, 512).unwrap().bracket;
        let p = bracket_from_diagonal_p(0.3, t, 512, 16).unwrap();
        assert!(((p - g) / g).abs() <= 5e-3, "t={t}: {p} vs {g}");
    }
}

#[test]
fn perturbed_family_approaches_the_limit() {
    let h = 0.8;
    let l1: f64 = 1.0 / constants(h).unwrap().lambda_h;
    let mut prev = f64::INFINITY;
    for eps in [0.1, 0.03, 0.01] {
        let sol = solve_g_eps(h, eps, 512).unwrap();
        let gap = (sol.integral() - l1).abs();
        assert!(gap < prev);
        prev = gap;
    }
    assert!(g_limit(0.3, 0.4).unwrap() == 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn coarse_columns_are_symmetric_and_positive(h in 0.52f64..0.98, t in 0.1f64..4.0) {
        let c = solve_g(h, t, 32).unwrap();
        for i in 0..=32 {
            prop_assert!((c.g[i] - c.g[32 - i]).abs() <= 1e-10 * c.g[i].abs().max(1.0));
            prop_assert!(c.g[i] > 0.0);
        }
        prop_assert!(c.bracket > 0.0 && c.bracket < t);
    }

    #[test]
    fn grid_nodes_are_uniform(n in 8usize..300, t in 0.01f64..100.0) {
        let g = Grid::new(n, t).unwrap();
        prop_assert_eq!(g.nodes.len(), n + 1);
        prop_assert!((g.nodes[n] - t).abs() <= 1e-12 * t);
        prop_assert!((g.step() - t / n as f64).abs() <= 1e-15 * t);
    }
}
