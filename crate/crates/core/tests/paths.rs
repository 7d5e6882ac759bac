use mfbm::fractional_kernels::cov_fbm;
use mfbm::gaussian_paths::{simulate, simulate_with, variation_diagnostic, Method};
use mfbm::Grid;
use proptest::prelude::*;

fn covariance_within_4se(h: f64, method: Method) {
    let n = 16;
    let reps = 5000;
    let g = Grid::new(n, 1.0).unwrap();
    let s = simulate_with(h, &g, reps, 2024, None, method).unwrap();
    let m = reps as f64;
    for i in 1..=n {
        for j in i..=n {
            let emp = s.paths.iter().map(|p| p.bh[i] * p.bh[j]).sum::<f64>() / m;
            let (ti, tj) = (g.nodes[i], g.nodes[j]);
            let c = cov_fbm(h, ti, tj).unwrap();
            let se = ((cov_fbm(h, ti, ti).unwrap() * cov_fbm(h, tj, tj).unwrap() + c * c) / m).sqrt();
            assert!((emp - c).abs() <= 4.0 * se, "H={h} {method:?} ({i},{j}): {emp} vs {c} (se {se})");
        }
    }
}

#[test]
fn fbm_covariance_goodness_cholesky() {
    for h in [0.2, 0.7] {
        covariance_within_4se(h, Method::Cholesky);
    }
}

#[test]
fn fbm_covariance_goodness_circulant() {
    for h in [0.2, 0.7] {
        covariance_within_4se(h, Method::Circulant);
    }
}

#[test]
fn brownian_and_fractional_parts_are_uncorrelated() {
    let g = Grid::new(64, 1.0).unwrap();
    let s = simulate(0.3, &g, 2000, 99, None).unwrap();
    let (mut sxy, mut sxx, mut syy, mut k) = (0.0, 0.0, 0.0, 0.0f64);
    for p in &s.paths {
        for i in 0..64 {
            let (a, b) = (p.b[i + 1] - p.b[i], p.bh[i + 1] - p.bh[i]);
            sxy += a * b;
            sxx += a * a;
            syy += b * b;
            k += 1.0;
        }
    }
    let r = sxy / (sxx * syy).sqrt();
    assert!(r.abs() <= 4.0 / k.sqrt(), "correlation {r}");
}

#[test]
fn quadratic_variation_of_the_mixture() {
    let g = Grid::new(1024, 1.0).unwrap();
    let s = simulate(0.8, &g, 20, 5, None).unwrap();
    let mean: f64 = s.paths.iter().map(|p| *variation_diagnostic(&p.x, 2.0, 10).unwrap().sums.last().unwrap()).sum::<f64>() / 20.0;
    assert!((mean - 1.0).abs() < 0.1, "{mean}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn same_seed_same_paths(seed in any::<u64>(), h in 0.05f64..1.0, theta in -5.0f64..5.0) {
        let g = Grid::new(16, 2.0).unwrap();
        let a = simulate(h, &g, 3, seed, Some(theta)).unwrap();
        let b = simulate(h, &g, 3, seed, Some(theta)).unwrap();
        prop_assert_eq!(&a.paths, &b.paths);
        for p in &a.paths {
            for j in 0..=16 {
                prop_assert_eq!(p.x[j], p.b[j] + p.bh[j]);
                let y = p.y.as_ref().unwrap()[j];
                prop_assert!((y - theta * g.nodes[j] - p.x[j]).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn variation_sums_are_nonnegative_and_level_zero_is_the_endpoint(seed in any::<u64>(), p in 0.5f64..4.0) {
        let g = Grid::new(64, 1.0).unwrap();
        let s = simulate(0.4, &g, 1, seed, None).unwrap();
        let x = &s.paths[0].x;
        let r = variation_diagnostic(x, p, 6).unwrap();
        prop_assert!(r.sums.iter().all(|v| *v >= 0.0));
        prop_assert!((r.sums[0] - x[64].abs().powf(p)).abs() <= 1e-12 * (1.0 + r.sums[0]));
    }
}
