use mfbm::fractional_kernels::{constants, cov_fbm, cov_mixed, kappa};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn beta_is_self_consistent(h in 0.001f64..0.999) {
        let p = constants(h).unwrap();
        let direct = p.c_h * p.c_h * (0.5 - h).powi(2) * p.lambda_h / (2.0 - 2.0 * h);
        prop_assert!((p.beta_h - direct).abs() <= 1e-12 * direct.abs().max(1e-300));
        prop_assert!(p.c_h > 0.0 && p.lambda_h > 0.0 && p.beta_h >= 0.0);
    }

    #[test]
    fn covariances_are_symmetric(h in 0.05f64..1.0, s in 0.0f64..5.0, t in 0.0f64..5.0) {
        let a = cov_mixed(h, s, t).unwrap();
        let b = cov_mixed(h, t, s).unwrap();
        prop_assert_eq!(a, b);
        let d = cov_mixed(h, s, s).unwrap();
        prop_assert!((d - (s + s.powf(2.0 * h))).abs() <= 1e-12 * d.max(1.0));
        // Cauchy–Schwarz
        let v = cov_fbm(h, s, t).unwrap();
        prop_assert!(v * v <= cov_fbm(h, s, s).unwrap() * cov_fbm(h, t, t).unwrap() * (1.0 + 1e-12) + 1e-15);
    }
}

#[test]
fn lambda_is_continuous_at_one_half() {
    for h in [0.5 - 1e-4, 0.5 + 1e-4] {
        assert!((constants(h).unwrap().lambda_h - 1.0).abs() < 1e-3);
    }
}

#[test]
fn mixed_covariance_is_positive_semidefinite() {
    let n = 64;
    for k in 1..=9 {
        let h = k as f64 / 10.0;
        let ts: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let m = DMatrix::from_fn(n, n, |i, j| cov_mixed(h, ts[i], ts[j]).unwrap());
        let min = SymmetricEigen::new(m).eigenvalues.min();
        assert!(min >= -1e-10, "H={h}: min eigenvalue {min}");
    }
}

#[test]
fn kappa_is_the_mixed_partial_off_diagonal() {
    for h in [0.6, 0.75, 0.9] {
        for (s, t) in [(0.2, 0.7), (0.5, 0.9), (1.3, 0.4)] {
            let d = 1e-4;
            let c = |a: f64, b: f64| cov_fbm(h, a, b).unwrap();
            let fd = (c(s + d, t + d) - c(s + d, t - d) - c(s - d, t + d) + c(s - d, t - d)) / (4.0 * d * d);
            let k = kappa(h, s, t).unwrap();
            assert!(((fd - k) / k).abs() < 1e-3, "H={h} ({s},{t}): {fd} vs {k}");
        }
    }
}
