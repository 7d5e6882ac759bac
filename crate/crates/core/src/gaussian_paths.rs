//! Exact simulation of fBm, mixed fBm and drifted observations, plus p-variation sums.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractional_kernels::fgn_autocov;
use crate::ie_solver::Grid;
use crate::linalg::cholesky_with_jitter;

/// How fBm increments are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Method {
    /// Cholesky factor of the increment covariance (default, exact).
    #[default]
    Cholesky,
    /// Circulant embedding via FFT (exact when the embedding is nonnegative).
    Circulant,
}

/// One simulated trajectory on the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub b: Vec<f64>,
    pub bh: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
}

/// A batch of trajectories with everything needed to replay it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathSample {
    pub h: f64,
    pub grid: Grid,
    pub seed: u64,
    pub theta: Option<f64>,
    pub method: Method,
    pub paths: Vec<Trajectory>,
}

impl PathSample {
    pub fn labels(&self) -> Vec<&'static str> {
        let mut l = vec!["B", "BH", "X"];
        if self.theta.is_some() {
            l.push("Y");
        }
        l
    }

    /// CSV with one row per (path, node): path, t, B, BH, X[, Y].
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["path".to_string(), "t".to_string()];
        header.extend(self.labels().iter().map(|s| s.to_string()));
        wr.write_record(&header)?;
        for (p, tr) in self.paths.iter().enumerate() {
            for (j, t) in self.grid.nodes.iter().enumerate() {
                let mut row = vec![p.to_string(), fmt(*t), fmt(tr.b[j]), fmt(tr.bh[j]), fmt(tr.x[j])];
                if let Some(y) = &tr.y {
                    row.push(fmt(y[j]));
                }
                wr.write_record(&row)?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Replay metadata (seed, H, θ, grid) as JSON.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "H": self.h,
            "seed": self.seed,
            "theta": self.theta,
            "n": self.grid.n,
            "t_end": self.grid.t_end,
            "n_paths": self.paths.len(),
            "method": self.method,
        })
    }
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

/// Shared, read-only generator of fBm increments for one (H, grid).
#[derive(Debug)]
pub struct FbmSampler {
    pub h: f64,
    pub grid: Grid,
    method: Method,
    /// Lower Cholesky factor of the increment covariance, row-major (Cholesky method).
    chol: Vec<f64>,
    /// Square roots of the circulant eigenvalues (circulant method).
    circ: Vec<f64>,
}

type SamplerKey = (u64, usize, u64, Method);

impl FbmSampler {
    /// Sampler for increments of B^H over the grid panels; cached per (H, grid, method).
    pub fn new(h: f64, grid: &Grid, method: Method) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<SamplerKey, Arc<FbmSampler>>>> = OnceLock::new();
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::Domain(format!("Hurst exponent must lie in (0,1], got {h}")));
        }
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (h.to_bits(), grid.n, grid.t_end.to_bits(), method);
        if let Some(s) = cache.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let n = grid.n;
        let step = grid.step();
        let mut sampler = FbmSampler { h, grid: grid.clone(), method, chol: Vec::new(), circ: Vec::new() };
        if h < 1.0 {
            match method {
                Method::Cholesky => {
                    let acov: Vec<f64> = (0..n).map(|k| fgn_autocov(h, step, k)).collect();
                    let cov = DMatrix::from_fn(n, n, |i, j| acov[i.abs_diff(j)]);
                    let l = cholesky_with_jitter(cov)?;
                    let mut chol = vec![0.0; n * (n + 1) / 2];
                    for i in 0..n {
                        for j in 0..=i {
                            chol[i * (i + 1) / 2 + j] = l[(i, j)];
                        }
                    }
                    sampler.chol = chol;
                }
                Method::Circulant => sampler.circ = circulant_roots(h, n)?,
            }
        }
        let s = Arc::new(sampler);
        cache.lock().unwrap().insert(key, s.clone());
        Ok(s)
    }

    fn rng(seed: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        rng
    }

    /// Increments of B^H over the n panels for substream `index`.
    pub fn fbm_increments(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.grid.n;
        if self.h == 1.0 {
            // B¹_t = t ξ
            let xi: f64 = StandardNormal.sample(rng);
            return vec![xi * self.grid.step(); n];
        }
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        match self.method {
            Method::Cholesky => (0..n)
                .map(|i| {
                    let row = &self.chol[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
                    row.iter().zip(&z).map(|(l, z)| l * z).sum()
                })
                .collect(),
            Method::Circulant => {
                let extra: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                circulant_draw(&self.circ, &z, &extra, self.grid.step().powf(self.h))
            }
        }
    }

    /// Trajectory number `index` of the stream identified by `seed`.
    pub fn trajectory(&self, seed: u64, index: u64, theta: Option<f64>) -> Trajectory {
        let mut rng = Self::rng(seed, index);
        let dbh = self.fbm_increments(&mut rng);
        let sq = self.grid.step().sqrt();
        let db: Vec<f64> = (0..self.grid.n).map(|_| sq * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let b = cumulate(&db);
        let bh = cumulate(&dbh);
        let x: Vec<f64> = b.iter().zip(&bh).map(|(a, c)| a + c).collect();
        let y = theta.map(|th| self.grid.nodes.iter().zip(&x).map(|(t, x)| th * t + x).collect());
        Trajectory { b, bh, x, y }
    }
}

fn cumulate(inc: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(inc.len() + 1);
    let mut s = 0.0;
    out.push(0.0);
    for d in inc {
        s += d;
        out.push(s);
    }
    out
}

/// √(λ_k / 2n) of the circulant embedding of the unit-step fGn autocovariance.
fn circulant_roots(h: f64, n: usize) -> Result<Vec<f64>> {
    let m = 2 * n;
    let mut c: Vec<Complex64> = (0..m)
        .map(|k| {
            let lag = if k <= n { k } else { m - k };
            Complex64::new(fgn_autocov(h, 1.0, lag), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut c);
    let tol = 1e-10 * c[0].re.abs();
    c.iter()
        .map(|l| {
            if l.re < -tol {
                Err(Error::Numerical(format!("circulant embedding has a negative eigenvalue {:.3e}", l.re)))
            } else {
                Ok((l.re.max(0.0) / m as f64).sqrt())
            }
        })
        .collect()
}

fn circulant_draw(roots: &[f64], z: &[f64], extra: &[f64], scale: f64) -> Vec<f64> {
    let m = roots.len();
    let n = m / 2;
    let mut w = vec![Complex64::new(0.0, 0.0); m];
    w[0] = Complex64::new(roots[0] * z[0], 0.0);
    w[n] = Complex64::new(roots[n] * extra[0], 0.0);
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    for k in 1..n {
        let v = Complex64::new(z[k], extra[k]) * (roots[k] * r2);
        w[k] = v;
        w[m - k] = v.conj();
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut w);
    w[..n].iter().map(|c| c.re * scale).collect()
}

/// Simulate `n_paths` trajectories of B, B^H, X = B + B^H and, with θ, Y = θt + X.
pub fn simulate(h: f64, grid: &Grid, n_paths: usize, seed: u64, theta: Option<f64>) -> Result<PathSample> {
    simulate_with(h, grid, n_paths, seed, theta, Method::Cholesky)
}

pub fn simulate_with(
    h: f64,
    grid: &Grid,
    n_paths: usize,
    seed: u64,
    theta: Option<f64>,
    method: Method,
) -> Result<PathSample> {
    if n_paths == 0 {
        return Err(Error::Input("n_paths must be at least 1".into()));
    }
    if let Some(t) = theta {
        if !t.is_finite() {
            return Err(Error::Input("theta must be finite".into()));
        }
    }
    let sampler = FbmSampler::new(h, grid, method)?;
    let paths = (0..n_paths as u64).into_par_iter().map(|i| sampler.trajectory(seed, i, theta)).collect();
    Ok(PathSample { h, grid: grid.clone(), seed, theta, method, paths })
}

/// p-variation sums over dyadic sub-partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub p: f64,
    pub levels: Vec<u32>,
    pub sums: Vec<f64>,
}

/// Σ|ΔX|^p over the dyadic partitions with 2^ℓ intervals, ℓ = 0..=max_level. The path must
/// have 2^L + 1 samples with L ≥ max_level.
pub fn variation_diagnostic(path: &[f64], p: f64, max_level: u32) -> Result<VariationReport> {
    if !(p > 0.0) {
        return Err(Error::Input(format!("variation order must be positive, got {p}")));
    }
    let n = path.len().saturating_sub(1);
    if n == 0 || !n.is_power_of_two() || (n.trailing_zeros()) < max_level {
        return Err(Error::Input(format!(
            "path with {n} intervals cannot be split into 2^{max_level} dyadic intervals"
        )));
    }
    let mut levels = Vec::new();
    let mut sums = Vec::new();
    for l in 0..=max_level {
        let stride = n >> l;
        let s = (0..1usize << l).map(|k| (path[(k + 1) * stride] - path[k * stride]).abs().powf(p)).sum();
        levels.push(l);
        sums.push(s);
    }
    Ok(VariationReport { p, levels, sums })
}
