//! Constants, covariance functions, singular kernels and the fractional operators K_f, Q_f.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_jacobi, power_product_integral, PowerFactor};
use crate::special::{beta, gamma};

/// Hurst exponent together with the constants c_H, λ_H, β_H.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstParams {
    pub h: f64,
    pub c_h: f64,
    pub lambda_h: f64,
    /// Only meaningful for H < ½; at H = 1 it is a sentinel 0 (the defining ratio diverges).
    pub beta_h: f64,
}

impl HurstParams {
    pub fn new(h: f64) -> Result<Self> {
        constants(h)
    }

    /// Diagonal exponent of the H > ½ kernel κ: |s−r|^{-(2−2H)}.
    pub fn kappa_exponent(&self) -> f64 {
        2.0 - 2.0 * self.h
    }
}

/// c_H, λ_H, β_H from Gamma-function evaluations.
pub fn constants(h: f64) -> Result<HurstParams> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Domain(format!("Hurst exponent must lie in (0,1], got {h}")));
    }
    let c_h = 1.0 / (2.0 * h * gamma(1.5 - h) * gamma(h + 0.5));
    let lambda_h = 2.0 * h * gamma(h + 0.5) * gamma(3.0 - 2.0 * h) / gamma(1.5 - h);
    let beta_h = if h == 1.0 {
        0.0
    } else {
        c_h * c_h * (0.5 - h).powi(2) * lambda_h / (2.0 - 2.0 * h)
    };
    Ok(HurstParams { h, c_h, lambda_h, beta_h })
}

fn check_times(s: f64, t: f64) -> Result<()> {
    if !(s >= 0.0 && t >= 0.0) {
        return Err(Error::Domain(format!("times must be nonnegative, got ({s}, {t})")));
    }
    Ok(())
}

/// Covariance of fBm: ½(t^{2H} + s^{2H} − |t−s|^{2H}).
pub fn cov_fbm(h: f64, s: f64, t: f64) -> Result<f64> {
    check_times(s, t)?;
    let e = 2.0 * h;
    Ok(0.5 * (t.powf(e) + s.powf(e) - (t - s).abs().powf(e)))
}

/// Covariance of the mixed process B + B^H.
pub fn cov_mixed(h: f64, s: f64, t: f64) -> Result<f64> {
    Ok(s.min(t) + cov_fbm(h, s, t)?)
}

/// Covariance of the fBm increments over [kδ, (k+1)δ] and [(k+d)δ, (k+d+1)δ].
pub fn fgn_autocov(h: f64, step: f64, lag: usize) -> f64 {
    let e = 2.0 * h;
    let d = lag as f64;
    let v = if lag == 0 {
        1.0
    } else {
        0.5 * ((d + 1.0).powf(e) + (d - 1.0).powf(e) - 2.0 * d.powf(e))
    };
    v * step.powf(e)
}

/// κ(s,r) = H(2H−1)|s−r|^{2H−2} for H > ½.
pub fn kappa(h: f64, s: f64, r: f64) -> Result<f64> {
    if !(h > 0.5 && h <= 1.0) {
        return Err(Error::Domain(format!("kappa requires H in (1/2, 1], got {h}")));
    }
    if s == r {
        return Err(Error::Singularity("kappa is singular on the diagonal".into()));
    }
    Ok(h * (2.0 * h - 1.0) * (s - r).abs().powf(2.0 * h - 2.0))
}

/// Bounded factor N(u,v) of κ̄(u,v) = |u−v|^{-2H} N(u,v) (H < ½).
///
/// N depends only on r = a/b where a ≤ b are u/(1−u), v/(1−v); it vanishes when either
/// argument touches {0, 1}.
pub fn kappa_bar_factor(h: f64, u: f64, v: f64) -> f64 {
    let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
    if lo <= 0.0 || hi >= 1.0 {
        return 0.0;
    }
    // r = lo(1-hi) / (hi(1-lo)), 1 - r = (hi-lo) / (hi(1-lo))
    let r = lo * (1.0 - hi) / (hi * (1.0 - lo));
    let one_minus_r = (hi - lo) / (hi * (1.0 - lo));
    n_of_ratio(h, r, one_minus_r)
}

fn n_of_ratio(h: f64, r: f64, one_minus_r: f64) -> f64 {
    let a = -0.5 - h;
    let e = 2.0 * h - 1.0;
    // x ∈ [0,1]: x^{-½-H} absorbed into the weight
    let rule = gauss_jacobi(24, a, 0.0);
    let i1: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(x, w)| w * (1.0 + x).powf(a) * (1.0 + one_minus_r * x).powf(e))
        .sum();
    // x = 1/y on [1, ∞): ∫₀¹ (1+y)^{-½-H} (y + 1 − r)^{2H−1} dy
    let i2 = power_product_integral(
        0.0,
        1.0,
        &[PowerFactor { point: -one_minus_r, exponent: e }],
        &|y: f64| (1.0 + y).powf(a),
    );
    r.powf(0.5 - h) * (i1 + i2)
}

/// κ̄(u,v) for H < ½ on the open unit square off the diagonal.
pub fn kappa_bar(h: f64, u: f64, v: f64) -> Result<f64> {
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::Domain(format!("kappa_bar requires H in (0, 1/2), got {h}")));
    }
    if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
        return Err(Error::Domain(format!("kappa_bar arguments must lie in (0,1), got ({u}, {v})")));
    }
    if u == v {
        return Err(Error::Singularity("kappa_bar is singular on the diagonal".into()));
    }
    Ok((u - v).abs().powf(-2.0 * h) * kappa_bar_factor(h, u, v))
}

/// χ(u) = β_H u^{½−H} L(u/(1−u)) for u ∈ [0,1], H < ½.
pub fn chi(p: &HurstParams, u: f64) -> f64 {
    let h = p.h;
    if u <= 0.0 {
        return 0.0;
    }
    let l = if u >= 1.0 {
        beta(0.5 - h, 2.0 * h)
    } else {
        let v = u / (1.0 - u);
        // L(v) = v^{-2H} ∫₀¹ y^{-½-H} (y + 1/v)^{-½-H} (1−y)^{1−2H} dy
        let f = power_product_integral(
            0.0,
            1.0,
            &[
                PowerFactor { point: 0.0, exponent: -0.5 - h },
                PowerFactor { point: -1.0 / v, exponent: -0.5 - h },
                PowerFactor { point: 1.0, exponent: 1.0 - 2.0 * h },
            ],
            &|_| 1.0,
        );
        v.powf(-2.0 * h) * f
    };
    p.beta_h * u.powf(0.5 - h) * l
}

/// κ̃(s,t) = |t−s|^{-2H} χ(min/max) for H < ½.
pub fn kappa_tilde(p: &HurstParams, s: f64, t: f64) -> Result<f64> {
    if !(p.h > 0.0 && p.h < 0.5) {
        return Err(Error::Domain(format!("kappa_tilde requires H in (0, 1/2), got {}", p.h)));
    }
    if !(s > 0.0 && t > 0.0) {
        return Err(Error::Domain("kappa_tilde arguments must be positive".into()));
    }
    if s == t {
        return Err(Error::Singularity("kappa_tilde is singular on the diagonal".into()));
    }
    Ok((t - s).abs().powf(-2.0 * p.h) * chi(p, s.min(t) / s.max(t)))
}

/// ρ̃(s,t) = √β s^{½−H} ∫_s^t τ^{H−½}(τ−s)^{−½−H} dτ, 0 ≤ s ≤ t.
pub fn rho_tilde(p: &HurstParams, s: f64, t: f64) -> Result<f64> {
    if !(s >= 0.0 && s <= t) {
        return Err(Error::Domain(format!("rho_tilde needs 0 <= s <= t, got ({s}, {t})")));
    }
    if s == 0.0 || s == t {
        return Ok(0.0);
    }
    let h = p.h;
    // τ = s + (t−s)y:  ∫₀¹ y^{-½-H} (y + s/(t−s))^{H−½} dy
    let sigma = s / (t - s);
    let j = power_product_integral(
        0.0,
        1.0,
        &[
            PowerFactor { point: 0.0, exponent: -0.5 - h },
            PowerFactor { point: -sigma, exponent: h - 0.5 },
        ],
        &|_| 1.0,
    );
    Ok(p.beta_h.sqrt() * s.powf(0.5 - h) * j)
}

/// ∂ρ̃(s,t)/∂t = √β s^{½−H} t^{H−½} (t−s)^{−½−H}.
pub fn rho_tilde_dt(p: &HurstParams, s: f64, t: f64) -> f64 {
    let h = p.h;
    p.beta_h.sqrt() * s.powf(0.5 - h) * t.powf(h - 0.5) * (t - s).powf(-0.5 - h)
}

/// Inverse kernel of the ρ̃ transform: ρ(s,t) = √((2−2H)/λ_H) s^{½−H} K_1(s,t), so that
/// x(t) = ∫₀ᵗ ρ(s,t) dx̃(s) when x̃(t) = ∫₀ᵗ ρ̃(s,t) dx(s).
pub fn rho(p: &HurstParams, s: f64, t: f64) -> Result<f64> {
    if !(s > 0.0 && s < t) {
        return Err(Error::Domain(format!("rho needs 0 < s < t, got ({s}, {t})")));
    }
    let h = p.h;
    let k1 = operator_k(h, &|_| 1.0, Some(&|_| 0.0), s, t)?;
    Ok(((2.0 - 2.0 * h) / p.lambda_h).sqrt() * s.powf(0.5 - h) * k1)
}

type RealFn<'a> = &'a dyn Fn(f64) -> f64;

fn check_finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Input("non-finite function value inside operator".into()))
    }
}

/// K_f(s,t) = −2H d/ds ∫_s^t f(r) r^{H−½} (r−s)^{H−½} dr, 0 < s ≤ t.
///
/// With `df` the derivative is taken under the integral; without it a centred finite
/// difference with step max(1e−6, 1e−4·s) is used.
pub fn operator_k(h: f64, f: RealFn, df: Option<RealFn>, s: f64, t: f64) -> Result<f64> {
    if !(s > 0.0 && s <= t) {
        return Err(Error::Domain(format!("operator_K needs 0 < s <= t, got ({s}, {t})")));
    }
    if s == t {
        if h > 0.5 {
            return Ok(0.0);
        }
        return Err(Error::Singularity("K_f(t,t) diverges for H <= 1/2".into()));
    }
    let e = h - 0.5;
    let d = t - s;
    let sigma = s / d;
    let factors = [PowerFactor { point: 0.0, exponent: e }, PowerFactor { point: -sigma, exponent: e }];
    // J(s) = ∫₀¹ f(s+dy) (s+dy)^{H−½} y^{H−½} dy = d^{H−½} ∫ f(·) (y+σ)^{H−½} y^{H−½} dy
    let j = power_product_integral(0.0, 1.0, &factors, &|y| f(s + d * y)) * d.powf(e);
    check_finite(j)?;
    match df {
        Some(df) => {
            // J'(s) = ∫₀¹ F'(s+dy)(1−y) y^{H−½} dy, F(r) = f(r) r^{H−½}
            let a = power_product_integral(0.0, 1.0, &factors, &|y| df(s + d * y) * (1.0 - y))
                * d.powf(e);
            let factors2 = [
                PowerFactor { point: 0.0, exponent: e },
                PowerFactor { point: -sigma, exponent: e - 1.0 },
            ];
            let b = power_product_integral(0.0, 1.0, &factors2, &|y| f(s + d * y) * (1.0 - y))
                * e
                * d.powf(e - 1.0);
            let jp = check_finite(a + b)?;
            let phi_p = -(h + 0.5) * d.powf(h - 0.5) * j + d.powf(h + 0.5) * jp;
            Ok(-2.0 * h * phi_p)
        }
        None => {
            let step = (1e-4 * s).max(1e-6).min(0.25 * s).min(0.25 * d);
            let phi = |x: f64| -> Result<f64> {
                let dx = t - x;
                let fx = [
                    PowerFactor { point: 0.0, exponent: e },
                    PowerFactor { point: -x / dx, exponent: e },
                ];
                let jx = power_product_integral(0.0, 1.0, &fx, &|y| f(x + dx * y)) * dx.powf(e);
                check_finite(jx * dx.powf(h + 0.5))
            };
            Ok(-2.0 * h * (phi(s + step)? - phi(s - step)?) / (2.0 * step))
        }
    }
}

/// Q_f(s) = d/ds ∫_0^s f(r) r^{½−H} (s−r)^{½−H} dr, s > 0.
pub fn operator_q(h: f64, f: RealFn, df: Option<RealFn>, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("operator_Q needs s > 0, got {s}")));
    }
    let e = 0.5 - h;
    let rule = gauss_jacobi(24, e, e);
    let integral = |x: f64, g: &dyn Fn(f64) -> f64| -> f64 {
        rule.nodes.iter().zip(&rule.weights).map(|(y, w)| w * g(x * y)).sum::<f64>()
    };
    match df {
        Some(df) => {
            // s^{2−2H} ∫₀¹ f(sy) y^{½−H}(1−y)^{½−H} dy, differentiated in s
            let i0 = check_finite(integral(s, f))?;
            let i1 = check_finite(
                rule.nodes.iter().zip(&rule.weights).map(|(y, w)| w * y * df(s * y)).sum::<f64>(),
            )?;
            Ok((2.0 - 2.0 * h) * s.powf(1.0 - 2.0 * h) * i0 + s.powf(2.0 - 2.0 * h) * i1)
        }
        None => {
            let step = (1e-4 * s).max(1e-6).min(0.5 * s);
            let phi = |x: f64| x.powf(2.0 - 2.0 * h) * integral(x, f);
            check_finite((phi(s + step) - phi(s - step)) / (2.0 * step))
        }
    }
}

/// Kinds of kernel exposed through [`evaluate_kernel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Kappa,
    KappaBar,
    KappaTilde,
    Chi,
    Rho,
    RhoTilde,
}

/// A single kernel evaluation with its arguments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEval {
    pub kind: KernelKind,
    pub value: f64,
    pub arguments: (f64, f64),
}

/// Evaluate any of the kernels by kind (`y` is ignored for χ).
pub fn evaluate_kernel(kind: KernelKind, h: f64, x: f64, y: f64) -> Result<KernelEval> {
    let p = constants(h)?;
    let value = match kind {
        KernelKind::Kappa => kappa(h, x, y)?,
        KernelKind::KappaBar => kappa_bar(h, x, y)?,
        KernelKind::KappaTilde => kappa_tilde(&p, x, y)?,
        KernelKind::Chi => {
            if !(h < 0.5) {
                return Err(Error::Domain("chi requires H < 1/2".into()));
            }
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Domain("chi argument must lie in [0,1]".into()));
            }
            chi(&p, x)
        }
        KernelKind::Rho => rho(&p, x, y)?,
        KernelKind::RhoTilde => rho_tilde(&p, x, y)?,
    };
    Ok(KernelEval { kind, value, arguments: (x, y) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::tanh_sinh;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn constants_reference_values() {
        // independently evaluated at high precision
        let cases = [
            (0.7, 0.668_206_631_277_599_5, 0.986_538_134_921_288_7, 0.029_365_958_530_098_702),
            (0.75, 0.600_210_877_438_070_9, 0.983_271_582_859_545_1, 0.044_278_329_163_201_85),
            (0.3, 1.559_148_806_314_398_8, 0.945_035_739_228_605_4, 0.065_637_997_294_799_05),
            (0.2, 2.145_984_228_335_348_7, 0.827_094_094_525_948_2, 0.214_254_769_476_983_55),
        ];
        for (h, c, l, b) in cases {
            let p = constants(h).unwrap();
            assert!(rel(p.c_h, c) < 1e-13, "c at {h}");
            assert!(rel(p.lambda_h, l) < 1e-13, "lambda at {h}");
            assert!(rel(p.beta_h, b) < 1e-12, "beta at {h}");
        }
    }

    #[test]
    fn half_and_one() {
        let p = constants(0.5).unwrap();
        assert_eq!((p.c_h, p.lambda_h, p.beta_h), (1.0, 1.0, 0.0));
        let p = constants(1.0).unwrap();
        assert!(p.c_h.is_finite() && p.lambda_h.is_finite() && p.beta_h.is_finite());
        assert!(constants(0.0).is_err() && constants(1.5).is_err());
    }

    #[test]
    fn covariances() {
        assert!(rel(cov_fbm(0.7, 1.0, 2.0).unwrap(), 2f64.powf(0.4)) < 1e-15);
        assert!((cov_fbm(0.5, 0.3, 0.8).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(cov_mixed(0.7, 1.0, 1.0).unwrap(), 2.0);
        let exact = 1.0 + 0.5 * (1.0 + 4f64.powf(1.2) - 3f64.powf(1.2));
        assert!(rel(cov_mixed(0.6, 1.0, 4.0).unwrap(), exact) < 1e-15);
        assert_eq!(cov_mixed(0.4, 0.0, 3.0).unwrap(), 0.0);
        assert!(cov_fbm(0.4, -1.0, 1.0).is_err());
    }

    #[test]
    fn kappa_values() {
        assert_eq!(kappa(1.0, 0.2, 0.9).unwrap(), 1.0);
        assert!((kappa(0.75, 0.0, 1.0).unwrap() - 0.375).abs() < 1e-15);
        assert!(rel(kappa(0.6, 0.0, 0.25).unwrap(), 0.12 * 4f64.powf(0.8)) < 1e-14);
        assert!(matches!(kappa(0.7, 0.3, 0.3), Err(Error::Singularity(_))));
        assert!(matches!(kappa(0.4, 0.3, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn kappa_bar_against_direct_integral() {
        // direct r-integral (uv)^{½−H} ∫_{u∨v}^1 r^{2H−1}(r−u)^{−½−H}(r−v)^{−½−H} dr
        let h = 0.3;
        for (u, v) in [(0.25f64, 0.75f64), (0.1, 0.2), (0.6, 0.95), (0.45, 0.46)] {
            let (lo, hi) = if u < v { (u, v) } else { (v, u) };
            let direct = (u * v).powf(0.5 - h)
                * tanh_sinh(
                    |r, dl, _| r.powf(2.0 * h - 1.0) * dl.powf(-0.5 - h) * (r - lo).powf(-0.5 - h),
                    hi,
                    1.0,
                    1e-13,
                );
            let kb = kappa_bar(h, u, v).unwrap();
            assert!(rel(kb, direct) < 1e-8, "({u},{v}): {kb} vs {direct}");
        }
        // frozen reference
        assert!(rel(kappa_bar(0.3, 0.25, 0.75).unwrap(), 4.921_403_989_474_451) < 1e-10);
        assert_eq!(kappa_bar(0.3, 0.2, 0.7).unwrap(), kappa_bar(0.3, 0.7, 0.2).unwrap());
    }

    #[test]
    fn kappa_bar_factor_bounded_near_diagonal() {
        let h = 0.3;
        let mut prev = 0.0;
        for k in 1..12 {
            let d = 10f64.powi(-k);
            let n = kappa_bar_factor(h, 0.4, 0.4 + d);
            assert!(n.is_finite() && n > 0.0 && n < 10.0);
            prev = n;
        }
        assert!((prev - kappa_bar_factor(h, 0.4, 0.4)).abs() < 1e-6);
        assert_eq!(kappa_bar_factor(h, 0.0, 0.3), 0.0);
    }

    #[test]
    fn tilde_kernel_matches_covariance_derivative() {
        let p = constants(0.3).unwrap();
        // ∫₀¹ ∂ρ̃(r,1) ∂ρ̃(r,2) dr
        let direct = tanh_sinh(
            |r, _, dr| {
                let a = p.beta_h.sqrt() * r.powf(0.5 - p.h) * dr.powf(-0.5 - p.h);
                a * rho_tilde_dt(&p, r, 2.0)
            },
            0.0,
            1.0,
            1e-13,
        );
        let kt = kappa_tilde(&p, 1.0, 2.0).unwrap();
        assert!((kt - direct).abs() < 1e-6, "{kt} vs {direct}");
        assert_eq!(kappa_tilde(&p, 1.0, 2.0).unwrap(), kappa_tilde(&p, 2.0, 1.0).unwrap());
        assert_eq!(chi(&p, 0.0), 0.0);
    }

    #[test]
    fn rho_tilde_properties() {
        let p = constants(0.2).unwrap();
        assert_eq!(rho_tilde(&p, 1.3, 1.3).unwrap(), 0.0);
        // homogeneity: ρ̃(s,t) = t^{½−H} ρ̃(s/t, 1)
        for (s, t) in [(0.3, 2.0), (1.0, 5.0), (0.01, 0.7)] {
            let a = rho_tilde(&p, s, t).unwrap();
            let b = t.powf(0.5 - p.h) * rho_tilde(&p, s / t, 1.0).unwrap();
            assert!(rel(a, b) < 1e-10);
        }
        // against the defining τ-integral
        let (s, t): (f64, f64) = (0.4, 1.1);
        let direct = p.beta_h.sqrt()
            * s.powf(0.5 - p.h)
            * tanh_sinh(|tau, dl, _| tau.powf(p.h - 0.5) * dl.powf(-0.5 - p.h), s, t, 1e-13);
        assert!(rel(rho_tilde(&p, s, t).unwrap(), direct) < 1e-9);
        assert!(rho_tilde(&p, 2.0, 1.0).is_err());
    }

    #[test]
    fn q_of_one_identity() {
        for h in [0.3, 0.7, 0.85] {
            let p = constants(h).unwrap();
            for s in [0.2, 1.0, 3.0] {
                let q = operator_q(h, &|_| 1.0, Some(&|_| 0.0), s).unwrap();
                let expect = (2.0 - 2.0 * h) / p.lambda_h * s.powf(1.0 - 2.0 * h);
                assert!(rel(p.c_h * q, expect) < 1e-12, "H={h} s={s}");
                let qfd = operator_q(h, &|_| 1.0, None, s).unwrap();
                assert!(rel(p.c_h * qfd, expect) < 1e-6);
            }
        }
    }

    #[test]
    fn k_vanishes_on_diagonal_and_fd_agrees() {
        assert_eq!(operator_k(0.7, &|x| x, None, 1.0, 1.0).unwrap(), 0.0);
        let f = |x: f64| 1.0 + x * x;
        let df = |x: f64| 2.0 * x;
        for h in [0.3, 0.7] {
            let a = operator_k(h, &f, Some(&df), 0.4, 1.0).unwrap();
            let b = operator_k(h, &f, None, 0.4, 1.0).unwrap();
            assert!(rel(a, b) < 1e-6, "H={h}: {a} vs {b}");
        }
        assert!(operator_k(0.7, &|_| f64::NAN, None, 0.5, 1.0).is_err());
    }

    #[test]
    fn inner_product_identity() {
        // ∫₀¹ φψ = c_H ∫₀¹ K_φ(s,1) Q_ψ(s) ds with φ = 1, ψ(s) = s
        let h = 0.7;
        let p = constants(h).unwrap();
        let rhs = tanh_sinh(
            |s, _, _| {
                let k = operator_k(h, &|_| 1.0, Some(&|_| 0.0), s, 1.0).unwrap();
                let q = operator_q(h, &|x| x, Some(&|_| 1.0), s).unwrap();
                k * q
            },
            0.0,
            1.0,
            1e-9,
        );
        assert!((p.c_h * rhs - 0.5).abs() < 1e-5, "{}", p.c_h * rhs);
    }

    #[test]
    fn k_inner_product_matches_kappa_double_integral() {
        // (2−2H)/λ ∫ s^{1−2H} K_φ K_ψ = ∫∫ φ(r)ψ(s) κ(r,s), φ = 1, ψ = s, t = 1
        let h = 0.7;
        let p = constants(h).unwrap();
        let lhs = (2.0 - 2.0 * h) / p.lambda_h
            * tanh_sinh(
                |s, _, _| {
                    let k1 = operator_k(h, &|_| 1.0, Some(&|_| 0.0), s, 1.0).unwrap();
                    let k2 = operator_k(h, &|x| x, Some(&|_| 1.0), s, 1.0).unwrap();
                    s.powf(1.0 - 2.0 * h) * k1 * k2
                },
                0.0,
                1.0,
                1e-9,
            );
        let rhs = h * (1.0 / (2.0 * h + 1.0) + beta(2.0, 2.0 * h));
        assert!((lhs - rhs).abs() < 1e-5, "{lhs} vs {rhs}");
    }

    #[test]
    fn mixed_partial_of_covariance_is_kappa() {
        let h = 0.8;
        let (s, t, d) = (0.3, 0.9, 1e-4);
        let c = |a: f64, b: f64| cov_fbm(h, a, b).unwrap();
        let fd = (c(s + d, t + d) - c(s + d, t - d) - c(s - d, t + d) + c(s - d, t - d)) / (4.0 * d * d);
        assert!(rel(fd, kappa(h, s, t).unwrap()) < 1e-3);
    }

    #[test]
    fn inverse_transform_round_trip() {
        // X̃ = ∫ρ̃ dx then ∫ρ dX̃ recovers x for x(t) = t.
        let p = constants(0.3).unwrap();
        let n = 200;
        let dt = 1.0 / n as f64;
        let xt: Vec<f64> = (0..=n)
            .map(|j| {
                let t = j as f64 * dt;
                (0..j).map(|i| rho_tilde(&p, (i as f64 + 0.5) * dt, t).unwrap() * dt).sum()
            })
            .collect();
        for j in [n / 4, n / 2, n] {
            let t = j as f64 * dt;
            let back: f64 = (0..j)
                .map(|i| rho(&p, (i as f64 + 0.5) * dt, t).unwrap() * (xt[i + 1] - xt[i]))
                .sum();
            assert!((back - t).abs() < 0.03 * t, "t={t}: {back}");
        }
    }
}
