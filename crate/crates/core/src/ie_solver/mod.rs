//! Second-kind Fredholm equations with weakly singular kernels on [0, t].
//!
//! Every equation is rescaled to the unit interval, where a single Nyström operator per
//! (kernel, H, mesh) is assembled, reduced to Hessenberg form and cached. Each time t then
//! costs one O(m²) shifted solve.

mod family;
pub mod krein;
mod mesh;
mod nystrom;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

pub use family::{DerivedFields, solve_g_dot, solve_g_family, solve_g_tilde, solve_g_tilde_family, FamilyRoute, KernelFamily};
pub use mesh::{Grid, UnitMesh, MAX_PANELS, MIN_PANELS};
pub use nystrom::{
    hat_moments, ConstantKernel, KappaBarKernel, KappaKernel, KappaTildeKernel, SplitKernel, UnitSolver,
};

use crate::error::{Error, Result};
use crate::fractional_kernels::{constants, HurstParams};

/// Discretisation parameters of the unit-interval mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Number of mesh panels; `None` ties it to the output grid (clamped to [64, 512]).
    pub mesh_panels: Option<usize>,
    /// Grading exponent towards both endpoints.
    pub grading: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { mesh_panels: None, grading: 3.0 }
    }
}

impl SolverSettings {
    pub fn panels_for(&self, n: usize) -> usize {
        self.mesh_panels.unwrap_or_else(|| n.clamp(64, 512))
    }

    pub fn mesh_for(&self, n: usize) -> Result<UnitMesh> {
        UnitMesh::graded(self.panels_for(n), self.grading)
    }
}

/// Which kernel a second-kind problem uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelId {
    /// H(2H−1)|u−v|^{2H−2}, H > ½.
    Kappa,
    /// β_H κ̄(u,v), H < ½.
    KappaBarScaled,
    /// κ̃(u,v), H < ½.
    KappaTilde,
    /// Identically zero (test stub).
    Zero,
}

/// ε y(u) + ∫₀¹ K(u,v) y(v) dv = rhs(u) on [0,1].
pub struct SecondKindProblem<'a> {
    pub kernel_id: KernelId,
    pub h: f64,
    pub eps: f64,
    pub rhs: &'a dyn Fn(f64) -> f64,
    /// Mesh panels.
    pub n: usize,
}

/// Nodal solution on the graded unit mesh.
#[derive(Debug, Clone)]
pub struct UnitSolution {
    pub mesh: UnitMesh,
    pub values: Vec<f64>,
}

impl UnitSolution {
    pub fn at(&self, u: f64) -> f64 {
        self.mesh.interp(&self.values, u)
    }

    pub fn integral(&self) -> f64 {
        self.mesh.integral(&self.values, 0.0, 1.0)
    }
}

fn kernel_for(id: KernelId, p: &HurstParams) -> Result<Arc<dyn SplitKernel>> {
    let h = p.h;
    Ok(match id {
        KernelId::Kappa => {
            if !(h > 0.5 && h <= 1.0) {
                return Err(Error::Domain(format!("kernel kappa needs H in (1/2, 1], got {h}")));
            }
            Arc::new(KappaKernel { h })
        }
        KernelId::KappaBarScaled => {
            if !(h > 0.0 && h < 0.5) {
                return Err(Error::Domain(format!("kernel kappa_bar needs H in (0, 1/2), got {h}")));
            }
            Arc::new(KappaBarKernel { h, beta: p.beta_h })
        }
        KernelId::KappaTilde => {
            if !(h > 0.0 && h < 0.5) {
                return Err(Error::Domain(format!("kernel kappa_tilde needs H in (0, 1/2), got {h}")));
            }
            Arc::new(KappaTildeKernel { params: *p })
        }
        KernelId::Zero => Arc::new(ConstantKernel { alpha: 0.0, value: 0.0 }),
    })
}

type CacheKey = (KernelId, u64, usize, u64, bool);

/// Assembled operator for (kernel, H, mesh), shared across calls.
pub fn unit_solver(id: KernelId, h: f64, panels: usize, grading: f64, with_resolvent: bool) -> Result<Arc<UnitSolver>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<UnitSolver>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (id, h.to_bits(), panels, grading.to_bits(), with_resolvent);
    if let Some(s) = cache.lock().unwrap().get(&key) {
        return Ok(s.clone());
    }
    // a solver with the resolvent operator also serves plain requests
    if !with_resolvent {
        let full = (id, h.to_bits(), panels, grading.to_bits(), true);
        if let Some(s) = cache.lock().unwrap().get(&full) {
            return Ok(s.clone());
        }
    }
    let p = constants(h)?;
    let kernel = kernel_for(id, &p)?;
    let mesh = UnitMesh::graded(panels, grading)?;
    let solver = Arc::new(UnitSolver::new(kernel, mesh, with_resolvent)?);
    cache.lock().unwrap().insert(key, solver.clone());
    Ok(solver)
}

/// Solve ε y + K y = rhs on the unit interval.
pub fn solve_second_kind(problem: &SecondKindProblem<'_>) -> Result<UnitSolution> {
    if !(problem.eps > 0.0 && problem.eps.is_finite()) {
        return Err(Error::Input(format!(
            "second-kind solve needs eps > 0, got {} (use g_limit for eps = 0)",
            problem.eps
        )));
    }
    let h = if problem.kernel_id == KernelId::Zero { 0.5 } else { problem.h };
    let solver = unit_solver(problem.kernel_id, h, problem.n, SolverSettings::default().grading, false)?;
    let rhs: Vec<f64> = solver.mesh.nodes.iter().map(|&u| (problem.rhs)(u)).collect();
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("right-hand side is not finite on the mesh".into()));
    }
    let values = solver.solve(problem.eps, &rhs)?;
    Ok(UnitSolution { mesh: solver.mesh.clone(), values })
}

/// One column g(·, t) sampled on the uniform grid s_i = i t / n.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GColumn {
    pub h: f64,
    pub t: f64,
    pub s: Vec<f64>,
    pub g: Vec<f64>,
    pub g_diag: f64,
    /// ∫₀ᵗ g(s,t) ds.
    pub bracket: f64,
}

/// Route-specific unit solve of the column at time t; returns nodal values on the mesh.
pub(crate) fn unit_column(solver: &UnitSolver, route: FamilyRoute, p: &HurstParams, t: f64) -> Result<Vec<f64>> {
    let h = p.h;
    let np = solver.mesh.nodes.len();
    match route {
        FamilyRoute::Half => Ok(vec![0.5; np]),
        FamilyRoute::Unit => Ok(vec![1.0 / (1.0 + t); np]),
        FamilyRoute::Kappa | FamilyRoute::KappaTilde => {
            // y + t^{1−α} W y = 1  ⇔  (μ I + W) y = μ with μ = t^{α−1}
            let mu = t.powf(solver.alpha() - 1.0);
            solver.solve(mu, &vec![mu; np])
        }
        FamilyRoute::KappaBar => {
            let eps = t.powf(2.0 * h - 1.0);
            let e = 0.5 - h;
            let rhs: Vec<f64> = solver
                .mesh
                .nodes
                .iter()
                .map(|&u| p.c_h * u.powf(e) * (1.0 - u).powf(e))
                .collect();
            solver.solve(eps, &rhs)
        }
    }
}

/// g(·, t) on a uniform grid of n panels over [0, t].
pub fn solve_g(h: f64, t: f64, n: usize) -> Result<GColumn> {
    solve_g_with(h, t, n, &SolverSettings::default())
}

pub fn solve_g_with(h: f64, t: f64, n: usize, settings: &SolverSettings) -> Result<GColumn> {
    let p = constants(h)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    let grid = Grid::new(n, t)?;
    let route = FamilyRoute::for_h(h);
    let solver = route_solver(route, h, n, settings, false)?;
    let y = unit_column(&solver, route, &p, t)?;
    let mesh = &solver.mesh;
    Ok(GColumn {
        h,
        t,
        s: grid.nodes.clone(),
        g: grid.unit_nodes.iter().map(|&u| mesh.interp(&y, u)).collect(),
        g_diag: y[y.len() - 1],
        bracket: t * mesh.integral(&y, 0.0, 1.0),
    })
}

pub(crate) fn route_solver(
    route: FamilyRoute,
    h: f64,
    n: usize,
    settings: &SolverSettings,
    with_resolvent: bool,
) -> Result<Arc<UnitSolver>> {
    let panels = settings.panels_for(n);
    let id = match route {
        FamilyRoute::Kappa => KernelId::Kappa,
        FamilyRoute::KappaBar => KernelId::KappaBarScaled,
        FamilyRoute::KappaTilde => KernelId::KappaTilde,
        FamilyRoute::Half | FamilyRoute::Unit => KernelId::Zero,
    };
    let h = if id == KernelId::Zero { 0.5 } else { h };
    unit_solver(id, h, panels, settings.grading, with_resolvent && id != KernelId::Zero)
}

/// Singularly perturbed family g_ε on [0,1]:
/// H > ½: ε g + ∫κ g = 1;  H < ½: ε g + β_H ∫κ̄ g = c_H u^{½−H}(1−u)^{½−H}.
pub fn solve_g_eps(h: f64, eps: f64, n: usize) -> Result<UnitSolution> {
    let p = constants(h)?;
    if eps == 0.0 {
        return Err(Error::Input("eps = 0 is the first-kind limit; use g_limit".into()));
    }
    if h > 0.5 {
        solve_second_kind(&SecondKindProblem { kernel_id: KernelId::Kappa, h, eps, rhs: &|_| 1.0, n })
    } else if h < 0.5 {
        let e = 0.5 - h;
        let c = p.c_h;
        let rhs = move |u: f64| c * u.powf(e) * (1.0 - u).powf(e);
        solve_second_kind(&SecondKindProblem { kernel_id: KernelId::KappaBarScaled, h, eps, rhs: &rhs, n })
    } else {
        Err(Error::Domain("the perturbed family is degenerate at H = 1/2".into()))
    }
}

/// Solution of the first-kind limit equation, evaluated at u ∈ (0,1):
/// c_H u^{½−H}(1−u)^{½−H} for H > ½ and 1 for H < ½.
pub fn g_limit(h: f64, u: f64) -> Result<f64> {
    let p = constants(h)?;
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("u must lie in [0,1], got {u}")));
    }
    if h > 0.5 {
        let e = 0.5 - h;
        Ok(p.c_h * u.powf(e) * (1.0 - u).powf(e))
    } else if h < 0.5 {
        Ok(1.0)
    } else {
        Err(Error::Domain("no first-kind limit at H = 1/2".into()))
    }
}

/// ⟨M⟩_t = ∫₀ᵗ p²(s,s) ds for H < ½, with p(·, s) solving
/// p + ∫₀ˢ p(r,s) κ̃(r,·) dr = √((2−2H)/λ_H) (·)^{½−H}.
///
/// By homogeneity p(su, s) = √((2−2H)/λ_H) s^{½−H} y_s(u) with (μI + W) y_s = μ u^{½−H},
/// μ = s^{2H−1}; the outer integral uses Gauss–Jacobi nodes for the s^{1−2H} weight.
/// This is an independent route to the bracket ∫₀ᵗ g(s,t) ds of the κ̄ equation.
pub fn bracket_from_diagonal_p(h: f64, t: f64, panels: usize, nodes: usize) -> Result<f64> {
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::Domain(format!("the p-route bracket needs H in (0, 1/2), got {h}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    let p = constants(h)?;
    let solver = unit_solver(KernelId::KappaTilde, h, panels, SolverSettings::default().grading, false)?;
    let shape: Vec<f64> = solver.mesh.nodes.iter().map(|&u| u.powf(0.5 - h)).collect();
    let rule = crate::quadrature::gauss_jacobi(nodes, 1.0 - 2.0 * h, 0.0);
    let mut acc = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let mu = (t * x).powf(2.0 * h - 1.0);
        let rhs: Vec<f64> = shape.iter().map(|v| mu * v).collect();
        let y = solver.solve(mu, &rhs)?;
        let end = y[y.len() - 1];
        acc += w * end * end;
    }
    Ok((2.0 - 2.0 * h) / p.lambda_h * t.powf(2.0 - 2.0 * h) * acc)
}

/// Pointwise resolvent R(x, t) = ∂_t g(x,t)/g(t,t), for x < t from the weighted unit solve and
/// for x > t from the extension of its defining equation.
#[derive(Debug)]
pub struct Resolvent {
    solver: Arc<UnitSolver>,
    cache: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
}

impl Resolvent {
    /// Resolvent of κ (H ∈ (½,1)) or of κ̃ (H < ½) on a mesh of `panels`.
    pub fn new(h: f64, panels: usize) -> Result<Self> {
        let id = if h > 0.5 && h < 1.0 {
            KernelId::Kappa
        } else if h > 0.0 && h < 0.5 {
            KernelId::KappaTilde
        } else {
            return Err(Error::Domain(format!("resolvent evaluator needs H in (0,1) \\ {{1/2}}, got {h}")));
        };
        let solver = unit_solver(id, h, panels, SolverSettings::default().grading, true)?;
        Ok(Self { solver, cache: Mutex::new(HashMap::new()) })
    }

    /// Weighted nodal resolvent for the column at time t.
    pub fn column(&self, t: f64) -> Result<Arc<Vec<f64>>> {
        if let Some(r) = self.cache.lock().unwrap().get(&t.to_bits()) {
            return Ok(r.clone());
        }
        let lambda = t.powf(1.0 - self.solver.alpha());
        let rho = Arc::new(self.solver.solve_resolvent(lambda)?);
        self.cache.lock().unwrap().insert(t.to_bits(), rho.clone());
        Ok(rho)
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        if !(x >= 0.0 && t > 0.0) || x == t {
            return Err(Error::Domain(format!("resolvent undefined at ({x}, {t})")));
        }
        let alpha = self.solver.alpha();
        let rho = self.column(t)?;
        let scale = t.powf(-alpha);
        if x < t {
            Ok(scale * self.solver.resolvent_value(&rho, x / t, (t - x) / t))
        } else {
            let lambda = t.powf(1.0 - alpha);
            Ok(scale * self.solver.extended_resolvent(&rho, lambda, x / t, (x - t) / t))
        }
    }

    pub fn solver(&self) -> &UnitSolver {
        &self.solver
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let c = solve_g(0.5, 2.0, 16).unwrap();
        assert!(c.g.iter().all(|g| (g - 0.5).abs() < 1e-15));
        assert!((c.bracket - 1.0).abs() < 1e-14);
        let c = solve_g(1.0, 1.0, 16).unwrap();
        assert!(c.g.iter().all(|g| (g - 0.5).abs() < 1e-15));
    }

    #[test]
    fn kappa_at_h_one_is_exact() {
        // constant kernel 1: y + ∫y = 1 ⇒ y = ½
        let sol = solve_second_kind(&SecondKindProblem { kernel_id: KernelId::Kappa, h: 1.0, eps: 1.0, rhs: &|_| 1.0, n: 32 })
            .unwrap();
        assert!(sol.values.iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn zero_kernel_returns_rhs() {
        let sol = solve_second_kind(&SecondKindProblem {
            kernel_id: KernelId::Zero,
            h: 0.7,
            eps: 1.0,
            rhs: &|u: f64| (3.0 * u).sin(),
            n: 32,
        })
        .unwrap();
        for (u, v) in sol.mesh.nodes.iter().zip(&sol.values) {
            assert!((v - (3.0 * u).sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_column() {
        let c = solve_g(0.7, 1.0, 64).unwrap();
        for i in 0..=64 {
            assert!((c.g[i] - c.g[64 - i]).abs() < 1e-9);
        }
        assert!(c.g_diag > 0.0);
    }

    #[test]
    fn refinement_self_convergence() {
        let coarse = solve_second_kind(&SecondKindProblem { kernel_id: KernelId::Kappa, h: 0.7, eps: 1.0, rhs: &|_| 1.0, n: 64 })
            .unwrap();
        let fine = solve_second_kind(&SecondKindProblem { kernel_id: KernelId::Kappa, h: 0.7, eps: 1.0, rhs: &|_| 1.0, n: 256 })
            .unwrap();
        for u in [0.0, 0.1, 0.37, 0.5, 0.9, 1.0] {
            let (a, b) = (coarse.at(u), fine.at(u));
            assert!((a - b).abs() < 1e-3 * b.abs(), "{u}: {a} {b}");
        }
    }

    #[test]
    fn limit_integral_is_inverse_lambda() {
        for h in [0.6, 0.75, 0.9] {
            let p = constants(h).unwrap();
            // ∫ c u^{½−H}(1−u)^{½−H} = c B(3/2−H, 3/2−H)
            let v = p.c_h * crate::special::beta(1.5 - h, 1.5 - h);
            assert!((v - 1.0 / p.lambda_h).abs() < 1e-12);
        }
    }

    #[test]
    fn extension_is_continuous_at_the_diagonal_side() {
        // away from the singular point the two branches describe one smooth function of x
        let r = Resolvent::new(0.8, 128).unwrap();
        let left = r.eval(0.5, 1.0).unwrap();
        let right = r.eval(1.5, 1.0).unwrap();
        assert!(left.is_finite() && right.is_finite());
        assert!(left < 0.0 && right < 0.0);
    }
}
