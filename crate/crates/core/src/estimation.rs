//! Drift MLE for Y_t = θt + B_t + B^H_t, its exact and asymptotic variances, and a seeded
//! Monte Carlo harness.
//!
//! θ̂ − θ = M_T/⟨M⟩_T is exactly Gaussian with variance 1/⟨M⟩_T, so the exact variance is a
//! calibrated target at every horizon; the asymptotic constants are only approached as T grows.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractional_kernels::constants;
use crate::gaussian_paths::{fmt, FbmSampler, Method};
use crate::ie_solver::{solve_g_family, Grid, KernelFamily};

const Z975: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub h: f64,
    pub t_end: f64,
    pub n: usize,
    pub theta_hat: f64,
    /// 1/⟨M⟩_T = 1/∫₀ᵀ g(s,T) ds.
    pub exact_variance: f64,
    pub ci95: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub h: f64,
    pub theta: f64,
    pub t_end: f64,
    pub n: usize,
    pub n_reps: usize,
    pub seed: u64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub bias_se: f64,
    pub empirical_variance: f64,
    pub empirical_variance_se: f64,
    pub theoretical_variance: f64,
    /// T^{2−2H}·exact variance for H > ½, T·exact variance otherwise.
    pub scaled_variance: f64,
    /// The same scaling applied to the empirical variance.
    pub scaled_empirical_variance: f64,
    /// λ_H for H > ½, 1 for H ≤ ½.
    pub asymptotic_constant: f64,
}

impl MonteCarloReport {
    pub const CSV_HEADER: [&'static str; 15] = [
        "H",
        "theta",
        "T",
        "n",
        "n_reps",
        "seed",
        "mean_estimate",
        "bias",
        "bias_se",
        "empirical_variance",
        "empirical_variance_se",
        "theoretical_variance",
        "scaled_variance",
        "scaled_empirical_variance",
        "asymptotic_constant",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            fmt(self.h),
            fmt(self.theta),
            fmt(self.t_end),
            self.n.to_string(),
            self.n_reps.to_string(),
            self.seed.to_string(),
            fmt(self.mean_estimate),
            fmt(self.bias),
            fmt(self.bias_se),
            fmt(self.empirical_variance),
            fmt(self.empirical_variance_se),
            fmt(self.theoretical_variance),
            fmt(self.scaled_variance),
            fmt(self.scaled_empirical_variance),
            fmt(self.asymptotic_constant),
        ]
    }
}

/// One CSV row per report, with header.
pub fn write_reports_csv<W: Write>(reports: &[MonteCarloReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MonteCarloReport::CSV_HEADER)?;
    for r in reports {
        w.write_record(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!("drift estimation needs H in (0,1), got {h}")));
    }
    Ok(())
}

/// θ̂ = Σ ḡ_i ΔY_i / Σ ḡ_i h with ḡ the panel averages of g(·,T), T the last grid node.
pub fn mle_theta(family: &KernelFamily, y: &[f64]) -> Result<EstimatorReport> {
    check_h(family.h())?;
    let n = family.n();
    if y.len() != n + 1 {
        return Err(Error::Input(format!("path has {} values, grid needs {}", y.len(), n + 1)));
    }
    let col = &family.g_panel[n];
    let step = family.grid.step();
    let bracket: f64 = col.iter().map(|g| g * step).sum();
    if !(bracket > 0.0) {
        return Err(Error::Invariant(format!("bracket ⟨M⟩_T = {bracket} is not positive")));
    }
    let num: f64 = col.iter().zip(y.windows(2)).map(|(g, w)| g * (w[1] - w[0])).sum();
    let theta_hat = num / bracket;
    let exact_variance = 1.0 / bracket;
    let half = Z975 * exact_variance.sqrt();
    Ok(EstimatorReport {
        h: family.h(),
        t_end: family.grid.t_end,
        n,
        theta_hat,
        exact_variance,
        ci95: [theta_hat - half, theta_hat + half],
    })
}

/// Limit of the scaled variance: λ_H for H > ½, 1 for H ≤ ½.
pub fn asymptotic_variance(h: f64) -> Result<f64> {
    check_h(h)?;
    Ok(if h > 0.5 { constants(h)?.lambda_h } else { 1.0 })
}

/// T^{2−2H} for H > ½ and T otherwise; the two agree at H = ½.
pub fn variance_scale(h: f64, t: f64) -> f64 {
    if h > 0.5 {
        t.powf(2.0 - 2.0 * h)
    } else {
        t
    }
}

/// Monte Carlo of θ̂ at each horizon in `t_list`, sharing one kernel solve per horizon.
/// Replication k at horizon index i uses stream k of seed `seed + i`.
pub fn monte_carlo_mle(
    h: f64,
    theta: f64,
    t_list: &[f64],
    n: usize,
    n_reps: usize,
    seed: u64,
) -> Result<Vec<MonteCarloReport>> {
    check_h(h)?;
    if n_reps < 100 {
        return Err(Error::Input(format!("need at least 100 replications, got {n_reps}")));
    }
    if !theta.is_finite() {
        return Err(Error::Input(format!("theta must be finite, got {theta}")));
    }
    let asym = asymptotic_variance(h)?;
    t_list
        .iter()
        .enumerate()
        .map(|(i, &t_end)| {
            let family = solve_g_family(h, t_end, n)?;
            let grid = Grid::new(n, t_end)?;
            let sampler = FbmSampler::new(h, &grid, Method::Cholesky)?;
            let s = seed.wrapping_add(i as u64);
            let est: Vec<f64> = (0..n_reps as u64)
                .into_par_iter()
                .map(|k| {
                    let tr = sampler.trajectory(s, k, Some(theta));
                    mle_theta(&family, tr.y.as_deref().unwrap_or_default()).map(|r| r.theta_hat)
                })
                .collect::<Result<_>>()?;
            let theoretical = 1.0 / family.bracket[n];
            Ok(summarize(h, theta, t_end, n, s, &est, theoretical, asym))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn summarize(h: f64, theta: f64, t_end: f64, n: usize, seed: u64, est: &[f64], theoretical: f64, asym: f64) -> MonteCarloReport {
    // fixed summation order keeps reports reproducible regardless of thread count
    let m = est.len() as f64;
    let mean = est.iter().sum::<f64>() / m;
    let dev: Vec<f64> = est.iter().map(|x| x - mean).collect();
    let var = dev.iter().map(|d| d * d).sum::<f64>() / (m - 1.0);
    let m4 = dev.iter().map(|d| d.powi(4)).sum::<f64>() / m;
    let var_se = ((m4 - var * var * (m - 3.0) / (m - 1.0)) / m).max(0.0).sqrt();
    let scale = variance_scale(h, t_end);
    MonteCarloReport {
        h,
        theta,
        t_end,
        n,
        n_reps: est.len(),
        seed,
        mean_estimate: mean,
        bias: mean - theta,
        bias_se: (var / m).sqrt(),
        empirical_variance: var,
        empirical_variance_se: var_se,
        theoretical_variance: theoretical,
        scaled_variance: scale * theoretical,
        scaled_empirical_variance: scale * var,
        asymptotic_constant: asym,
    }
}

/// Reduction of Y = θt + aB + bB^H (H ≠ ½) to the unit model by self-similarity:
/// with c = (a/b)^{1/(H−½)}, Z_u = Y_{cu}/(a√c) = θ'u + B'_u + B'^H_u on [0, T/c],
/// where θ' = θ√c/a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitScaling {
    pub time_factor: f64,
    pub path_factor: f64,
}

impl UnitScaling {
    pub fn new(h: f64, a: f64, b: f64) -> Result<Self> {
        check_h(h)?;
        if h == 0.5 {
            return Err(Error::Domain("at H = 1/2 only a² + b² is identifiable; no unit reduction".into()));
        }
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Domain(format!("noise scales must be positive, got a={a}, b={b}")));
        }
        let c = (a / b).powf(1.0 / (h - 0.5));
        Ok(Self { time_factor: c, path_factor: 1.0 / (a * c.sqrt()) })
    }

    /// Horizon of the unit model.
    pub fn horizon(&self, t_end: f64) -> f64 {
        t_end / self.time_factor
    }

    /// Path values on the rescaled grid u_k = t_k / c.
    pub fn path(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| v * self.path_factor).collect()
    }

    /// θ from the drift θ' estimated in the unit model.
    pub fn theta(&self, unit_theta: f64) -> f64 {
        unit_theta / (self.path_factor * self.time_factor)
    }
}
