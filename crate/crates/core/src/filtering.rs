//! Path functionals of the fundamental martingale: M, the innovation W, φ, reconstruction of
//! X, the two likelihood ratios and the brute-force conditional-expectation oracle.
//!
//! Stochastic integrals ∫ k(s,t) dX_s are discretised as Σ k̄_i ΔX_i with k̄_i the average of
//! k(·,t) over panel i, which is exact for piecewise-linear paths and keeps the discrete
//! bracket Σ ḡ_i h equal to the solver's ∫ g(s,t) ds.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractional_kernels::{constants, fgn_autocov, rho_tilde};
use crate::ie_solver::{FamilyRoute, Grid, KernelFamily, UnitMesh};
use crate::linalg::{cholesky_with_jitter, spd_solve};

/// Reference measure of a likelihood ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityRoute {
    /// H = ½: X is a Brownian motion with variance 2t; its law is its own reference.
    Trivial,
    /// H ∈ (¾, 1]: density with respect to Wiener measure.
    Wiener,
    /// H < ¼: density with respect to the law of fBm.
    Fractional,
}

/// Per-path filter output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterOutput {
    pub grid: Grid,
    pub m: Vec<f64>,
    /// Innovation Brownian motion (H ≥ ½), empty otherwise.
    pub w: Vec<f64>,
    /// φ_t, or φ̃_t on the fractional route.
    pub phi: Vec<f64>,
    pub log_density: f64,
    /// exp(log_density) when |log_density| < 30.
    pub density: Option<f64>,
    pub route: DensityRoute,
}

/// Increment weights of E(B_t | increments of X up to t).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleWeights {
    pub grid: Grid,
    pub target_time: f64,
    pub weights: Vec<f64>,
}

fn regime_error(h: f64) -> Error {
    Error::UnsupportedRegime(format!(
        "H = {h}: the law of X is equivalent to Wiener measure only for H in {{1/2}} U (3/4, 1] and to \
         the fBm law only for H < 1/4; for 1/4 <= H <= 3/4, H != 1/2 the measures are singular"
    ))
}

/// Route of the likelihood ratio for H, or the regime error.
pub fn density_route(h: f64) -> Result<DensityRoute> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Domain(format!("Hurst exponent must lie in (0,1], got {h}")));
    }
    if h == 0.5 {
        Ok(DensityRoute::Trivial)
    } else if h > 0.75 {
        Ok(DensityRoute::Wiener)
    } else if h < 0.25 {
        Ok(DensityRoute::Fractional)
    } else {
        Err(regime_error(h))
    }
}

fn check_path(grid: &Grid, x: &[f64]) -> Result<()> {
    if x.len() != grid.n + 1 {
        return Err(Error::Input(format!("path has {} samples, grid has {} nodes", x.len(), grid.n + 1)));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("path contains non-finite values".into()));
    }
    Ok(())
}

fn increments(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Σ_{i<j} k[j][i] Δx_i for every node j.
fn triangular_sums(k: &[Vec<f64>], dx: &[f64]) -> Vec<f64> {
    k.iter().map(|col| col.iter().zip(dx).map(|(a, b)| a * b).sum()).collect()
}

/// M(t_j) = ∫₀^{t_j} g(s, t_j) dX_s.
pub fn martingale_path(family: &KernelFamily, x: &[f64]) -> Result<Vec<f64>> {
    check_path(&family.grid, x)?;
    Ok(triangular_sums(&family.g_panel, &increments(x)))
}

/// W(t_j) = Σ ΔM_i / √(Δ⟨M⟩_i / h): the innovation Brownian motion. The normaliser equals
/// g(s,s) for H > ½ (where d⟨M⟩_s = g²(s,s) ds) and 1/√2 at H = ½.
pub fn innovation_path(family: &KernelFamily, m: &[f64]) -> Result<Vec<f64>> {
    check_path(&family.grid, m)?;
    if matches!(family.route, FamilyRoute::KappaBar | FamilyRoute::KappaTilde) {
        return Err(Error::Invariant("innovation needs g(t,t) > 0, which fails for H < 1/2".into()));
    }
    let h = family.grid.step();
    let mut w = Vec::with_capacity(m.len());
    w.push(0.0);
    for i in 0..family.grid.n {
        let d = (family.bracket[i + 1] - family.bracket[i]) / h;
        if !(d > 0.0) {
            return Err(Error::Invariant(format!("bracket is not increasing on panel {i}")));
        }
        w.push(w[i] + (m[i + 1] - m[i]) / d.sqrt());
    }
    Ok(w)
}

fn derived(family: &KernelFamily) -> Result<&crate::ie_solver::DerivedFields> {
    family
        .derived
        .as_ref()
        .ok_or_else(|| Error::Input("kernel family has no derivative fields; populate them first".into()))
}

/// φ(t_j) = ∫₀^{t_j} R(s, t_j) dX_s (H ∈ {½} ∪ (¾, 1]).
pub fn phi_path(family: &KernelFamily, x: &[f64]) -> Result<Vec<f64>> {
    let h = family.h();
    if density_route(h)? == DensityRoute::Fractional {
        return Err(Error::UnsupportedRegime(format!(
            "phi is defined for H in {{1/2}} U (3/4, 1]; use the transformed path for H = {h} < 1/4"
        )));
    }
    check_path(&family.grid, x)?;
    Ok(triangular_sums(&derived(family)?.r_panel, &increments(x)))
}

/// φ̃(t_j) = ∫₀^{t_j} R̃(s, t_j) dX̃_s on the transformed path (H < ¼).
pub fn phi_tilde_path(tilde: &KernelFamily, x_tilde: &[f64]) -> Result<Vec<f64>> {
    if tilde.route != FamilyRoute::KappaTilde {
        return Err(Error::Input("phi_tilde needs the transformed (tilde) family".into()));
    }
    if density_route(tilde.h())? != DensityRoute::Fractional {
        return Err(regime_error(tilde.h()));
    }
    check_path(&tilde.grid, x_tilde)?;
    Ok(triangular_sums(&derived(tilde)?.r_panel, &increments(x_tilde)))
}

/// −Σ φ(t_i) Δx_i − ½ Σ φ(t_i)² h: the discretised Girsanov exponent with adapted integrand.
fn girsanov_log(phi: &[f64], x: &[f64], h: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..phi.len() - 1 {
        s -= phi[i] * (x[i + 1] - x[i]) + 0.5 * phi[i] * phi[i] * h;
    }
    s
}

/// log dμ^X/dμ^W evaluated at the path x (H ∈ {½} ∪ (¾, 1]).
pub fn rn_density_wiener(family: &KernelFamily, x: &[f64]) -> Result<f64> {
    match density_route(family.h())? {
        DensityRoute::Trivial => {
            check_path(&family.grid, x)?;
            Ok(0.0)
        }
        DensityRoute::Wiener => {
            let phi = phi_path(family, x)?;
            Ok(girsanov_log(&phi, x, family.grid.step()))
        }
        DensityRoute::Fractional => Err(Error::UnsupportedRegime(
            "for H < 1/4 the law of X is equivalent to the fBm law, not to Wiener measure".into(),
        )),
    }
}

/// The map x ↦ X̃ with X̃_t = ∫₀ᵗ ρ̃(s,t) dX_s, which turns fBm into Brownian motion.
///
/// `apply` uses the discrete canonical innovation: ΔX̃ = √h L⁻¹ ΔX with L the Cholesky
/// factor of the fGn covariance on the grid, so fBm increments map to exactly iid N(0, h).
/// `apply_kernel` is the direct quadrature of ρ̃; both agree path-wise to O(h^{½}) in the
/// increments, but the quadrature's local error biases the likelihood ratio for rough H.
#[derive(Debug)]
pub struct TildeTransform {
    pub h: f64,
    pub grid: Grid,
    /// weights[j][i]: average of ρ̃(·, t_j) over panel i, i < j.
    weights: Vec<Vec<f64>>,
    /// Lower Cholesky factor of the fGn increment covariance, row-packed.
    chol: Vec<Vec<f64>>,
}

impl TildeTransform {
    pub fn new(h: f64, grid: &Grid) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<(u64, usize, u64), Arc<TildeTransform>>>> = OnceLock::new();
        if !(h > 0.0 && h < 0.5) {
            return Err(Error::Domain(format!("the tilde transform needs H in (0, 1/2), got {h}")));
        }
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (h.to_bits(), grid.n, grid.t_end.to_bits());
        if let Some(t) = cache.lock().unwrap().get(&key) {
            return Ok(t.clone());
        }
        // ρ̃(s,t) = t^{½−H} ρ̃(s/t, 1), tabulated once and integrated piecewise-linearly
        let p = constants(h)?;
        let mesh = UnitMesh::graded(2048, 3.0)?;
        let table: Vec<f64> = mesh.nodes.iter().map(|&u| rho_tilde(&p, u, 1.0)).collect::<Result<_>>()?;
        let weights = (0..=grid.n)
            .map(|j| {
                if j == 0 {
                    return Vec::new();
                }
                let jf = j as f64;
                let scale = grid.nodes[j].powf(0.5 - h) * jf;
                (0..j).map(|i| scale * mesh.integral(&table, i as f64 / jf, (i + 1) as f64 / jf)).collect()
            })
            .collect();
        let step = grid.step();
        let acov: Vec<f64> = (0..grid.n).map(|k| fgn_autocov(h, step, k)).collect();
        let l = cholesky_with_jitter(DMatrix::from_fn(grid.n, grid.n, |a, b| acov[a.abs_diff(b)]))?;
        let chol = (0..grid.n).map(|i| (0..=i).map(|k| l[(i, k)]).collect()).collect();
        let t = Arc::new(Self { h, grid: grid.clone(), weights, chol });
        cache.lock().unwrap().insert(key, t.clone());
        Ok(t)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_path(&self.grid, x)?;
        let dx = increments(x);
        let root = self.grid.step().sqrt();
        let mut z = vec![0.0; dx.len()];
        let mut out = Vec::with_capacity(x.len());
        out.push(0.0);
        for (i, row) in self.chol.iter().enumerate() {
            let acc: f64 = row[..i].iter().zip(&z[..i]).map(|(a, b)| a * b).sum();
            z[i] = (dx[i] - acc) / row[i];
            out.push(out[i] + root * z[i]);
        }
        Ok(out)
    }

    pub fn apply_kernel(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_path(&self.grid, x)?;
        Ok(triangular_sums(&self.weights, &increments(x)))
    }
}

/// log dμ^X/dμ^{B^H} evaluated at the path x (H < ¼).
pub fn rn_density_fbm(tilde: &KernelFamily, transform: &TildeTransform, x: &[f64]) -> Result<f64> {
    let h = tilde.h();
    if density_route(h)? != DensityRoute::Fractional {
        return Err(regime_error(h));
    }
    if transform.grid != tilde.grid || transform.h != h {
        return Err(Error::Input("transform and family disagree on H or grid".into()));
    }
    let xt = transform.apply(x)?;
    let phi = phi_tilde_path(tilde, &xt)?;
    Ok(girsanov_log(&phi, &xt, tilde.grid.step()))
}

/// X̂(t_j) = ∫₀^{t_j} G(s, t_j) dM_s, with G at panel midpoints.
pub fn reconstruct_x(family: &KernelFamily, m: &[f64]) -> Result<Vec<f64>> {
    if family.h() < 0.5 {
        return Err(Error::Domain("reconstruction from M is implemented for H >= 1/2".into()));
    }
    check_path(&family.grid, m)?;
    let d = derived(family)?;
    Ok(triangular_sums(&d.big_g, &increments(m)))
}

/// max|X̂ − X| / max|X|.
pub fn reconstruction_error(x_hat: &[f64], x: &[f64]) -> f64 {
    let err = x_hat.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// Normal-correlation weights of E(B_{t_j} | ΔX_0, …, ΔX_{j−1}).
pub fn discrete_conditional_oracle(h: f64, grid: &Grid, j: usize) -> Result<OracleWeights> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!("oracle needs H in (0,1), got {h}")));
    }
    if j == 0 || j > grid.n {
        return Err(Error::Input(format!("target node {j} outside 1..={}", grid.n)));
    }
    if j > 512 {
        return Err(Error::Input(format!("oracle is a dense solve; at most 512 increments, got {j}")));
    }
    let step = grid.step();
    let acov: Vec<f64> = (0..j).map(|k| fgn_autocov(h, step, k)).collect();
    let cov = DMatrix::from_fn(j, j, |a, b| acov[a.abs_diff(b)] + if a == b { step } else { 0.0 });
    let rhs = vec![step; j];
    let w = spd_solve(cov, &rhs)?;
    Ok(OracleWeights { grid: grid.clone(), target_time: grid.nodes[j], weights: w })
}

/// All per-path functionals for one observed path.
pub fn filter_path(
    family: &KernelFamily,
    tilde: Option<(&KernelFamily, &TildeTransform)>,
    x: &[f64],
) -> Result<FilterOutput> {
    let route = density_route(family.h())?;
    let m = martingale_path(family, x)?;
    let (w, phi, log_density) = match route {
        DensityRoute::Trivial | DensityRoute::Wiener => {
            let w = innovation_path(family, &m)?;
            let phi = if route == DensityRoute::Wiener { phi_path(family, x)? } else { vec![0.0; x.len()] };
            (w, phi, rn_density_wiener(family, x)?)
        }
        DensityRoute::Fractional => {
            let (tf, tr) = tilde.ok_or_else(|| Error::Input("fractional route needs the tilde family".into()))?;
            let xt = tr.apply(x)?;
            let phi = phi_tilde_path(tf, &xt)?;
            let ld = girsanov_log(&phi, &xt, tf.grid.step());
            (Vec::new(), phi, ld)
        }
    };
    let density = if log_density.abs() < 30.0 { Some(log_density.exp()) } else { None };
    Ok(FilterOutput { grid: family.grid.clone(), m, w, phi, log_density, density, route })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ie_solver::solve_g_family;

    #[test]
    fn regimes() {
        assert_eq!(density_route(0.5).unwrap(), DensityRoute::Trivial);
        assert_eq!(density_route(0.8).unwrap(), DensityRoute::Wiener);
        assert_eq!(density_route(0.2).unwrap(), DensityRoute::Fractional);
        for h in [0.25, 0.3, 0.6, 0.75] {
            assert!(matches!(density_route(h), Err(Error::UnsupportedRegime(_))));
        }
    }

    #[test]
    fn whitening_tracks_kernel_transform() {
        let g = Grid::new(64, 1.0).unwrap();
        let tr = TildeTransform::new(0.2, &g).unwrap();
        // a smooth path: both forms approximate the same integral
        let x: Vec<f64> = g.nodes.iter().map(|t| t * t).collect();
        let a = tr.apply(&x).unwrap();
        let b = tr.apply_kernel(&x).unwrap();
        assert!((a[64] - b[64]).abs() < 2e-2 * b[64].abs(), "{} vs {}", a[64], b[64]);
        // exact inverse of the fGn factor
        let acov: Vec<f64> = (0..64).map(|k| fgn_autocov(0.2, g.step(), k)).collect();
        let l = DMatrix::from_fn(64, 64, |i, j| acov[i.abs_diff(j)]).cholesky().unwrap().l();
        let z = nalgebra::DVector::from_fn(64, |i, _| ((i * 7 % 11) as f64 - 5.0) / 3.0);
        let dx = &l * &z;
        let mut path = vec![0.0];
        for d in dx.iter() {
            path.push(path.last().unwrap() + d);
        }
        let w = tr.apply(&path).unwrap();
        for i in 0..64 {
            assert!((w[i + 1] - w[i] - g.step().sqrt() * z[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn half_martingale_is_half_of_x() {
        let mut f = solve_g_family(0.5, 1.0, 16).unwrap();
        f.populate_derivatives().unwrap();
        let x: Vec<f64> = (0..=16).map(|k| (k as f64 * 0.7).sin()).collect();
        let m = martingale_path(&f, &x).unwrap();
        for (a, b) in m.iter().zip(&x) {
            assert!((a - 0.5 * b).abs() < 1e-15);
        }
        let xh = reconstruct_x(&f, &m).unwrap();
        assert!(reconstruction_error(&xh, &x) < 1e-14);
        assert_eq!(rn_density_wiener(&f, &x).unwrap(), 0.0);
    }

    #[test]
    fn zero_path_has_unit_density() {
        let mut f = solve_g_family(0.85, 1.0, 16).unwrap();
        f.populate_derivatives().unwrap();
        let x = vec![0.0; 17];
        assert!(phi_path(&f, &x).unwrap().iter().all(|v| *v == 0.0));
        assert_eq!(rn_density_wiener(&f, &x).unwrap(), 0.0);
    }

    #[test]
    fn oracle_at_half_is_one_half() {
        let g = Grid::new(32, 1.0).unwrap();
        let o = discrete_conditional_oracle(0.5, &g, 32).unwrap();
        assert!(o.weights.iter().all(|w| (w - 0.5).abs() < 1e-12));
    }
}
