use mfbm::filtering::{
    discrete_conditional_oracle, innovation_path, martingale_path, reconstruct_x, reconstruction_error,
    rn_density_fbm, rn_density_wiener, TildeTransform,
};
use mfbm::gaussian_paths::simulate;
use mfbm::ie_solver::{solve_g_family, solve_g_tilde};
use mfbm::{Error, Grid};
use nalgebra::{DMatrix, DVector};

fn interior_oracle_error(h: f64, n: usize) -> f64 {
    let f = solve_g_family(h, 1.0, n).unwrap();
    let o = discrete_conditional_oracle(h, &f.grid, n).unwrap();
    let col = &f.g_panel[n];
    (n / 10..n - n / 10).map(|i| ((o.weights[i] - col[i]) / col[i]).abs()).fold(0.0, f64::max)
}

#[test]
fn oracle_agreement_tightens_under_refinement() {
    for h in [0.3, 0.7, 0.85] {
        let (a, b) = (interior_oracle_error(h, 128), interior_oracle_error(h, 256));
        assert!(b <= 2e-2 && b < a, "H={h}: {a:e} -> {b:e}");
    }
}

#[test]
fn terminal_value_is_linear_in_martingale_increments() {
    // regression of X_T on ΔM explains the variance (filtration equality shadow)
    let (h, n, reps) = (0.7, 32, 1500);
    let f = solve_g_family(h, 1.0, n).unwrap();
    let s = simulate(h, &f.grid, reps, 17, None).unwrap();
    let mut design = DMatrix::zeros(reps, n);
    let mut target = DVector::zeros(reps);
    for (r, p) in s.paths.iter().enumerate() {
        let m = martingale_path(&f, &p.x).unwrap();
        for i in 0..n {
            design[(r, i)] = m[i + 1] - m[i];
        }
        target[r] = p.x[n];
    }
    let coef = design.clone().svd(true, true).solve(&target, 1e-12).unwrap();
    let resid = &target - &design * coef;
    let mean = target.mean();
    let tot: f64 = target.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = 1.0 - resid.norm_squared() / tot;
    assert!(r2 >= 0.99, "R² = {r2}");
}

#[test]
fn reconstruction_from_the_martingale() {
    let mut f = solve_g_family(0.85, 1.0, 256).unwrap();
    f.populate_derivatives().unwrap();
    let s = simulate(0.85, &f.grid, 20, 3, None).unwrap();
    for p in &s.paths {
        let m = martingale_path(&f, &p.x).unwrap();
        let xh = reconstruct_x(&f, &m).unwrap();
        assert!(reconstruction_error(&xh, &p.x) < 1e-2);
    }
}

#[test]
fn innovation_has_unit_bracket() {
    let n = 1024;
    for h in [0.6, 0.85] {
        let f = solve_g_family(h, 1.0, n).unwrap();
        let s = simulate(h, &f.grid, 100, 8, None).unwrap();
        let qv: f64 = s
            .paths
            .iter()
            .map(|p| {
                let w = innovation_path(&f, &martingale_path(&f, &p.x).unwrap()).unwrap();
                w.windows(2).map(|d| (d[1] - d[0]).powi(2)).sum::<f64>()
            })
            .sum::<f64>()
            / 100.0;
        assert!((qv - 1.0).abs() <= 0.05, "H={h}: [W]_1 = {qv}");
    }
}

#[test]
fn densities_are_rejected_in_the_singular_regime() {
    let f = solve_g_family(0.6, 1.0, 32).unwrap();
    let x = vec![0.0; 33];
    assert!(matches!(rn_density_wiener(&f, &x), Err(Error::UnsupportedRegime(_))));
    let g = Grid::new(32, 1.0).unwrap();
    let tf = solve_g_tilde(0.2, 1.0, 32).unwrap();
    let tr = TildeTransform::new(0.2, &g).unwrap();
    assert!(rn_density_fbm(&tf, &tr, &x).unwrap().abs() < 1e-300);
}

#[test]
fn median_reconstruction_error_is_small() {
    let mut f = solve_g_family(0.7, 1.0, 512).unwrap();
    f.populate_derivatives().unwrap();
    let s = simulate(0.7, &f.grid, 100, 12, None).unwrap();
    let mut errs: Vec<f64> = s
        .paths
        .iter()
        .map(|p| reconstruction_error(&reconstruct_x(&f, &martingale_path(&f, &p.x).unwrap()).unwrap(), &p.x))
        .collect();
    errs.sort_by(f64::total_cmp);
    assert!(errs[50] <= 0.05, "median {}", errs[50]);
}
