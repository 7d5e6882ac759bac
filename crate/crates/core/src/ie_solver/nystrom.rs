//! Product-integration Nyström discretisation on a graded unit mesh.
//!
//! A kernel is split as K(u,v) = |u−v|^{−α} S(u,v) with S bounded. The unknown is
//! piecewise linear; S(u_i,·)·y(·) is interpolated linearly at the mesh nodes and the
//! singular factor is integrated exactly against the hat functions.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::mesh::UnitMesh;
use crate::error::{Error, Result};
use crate::fractional_kernels::{chi, kappa_bar_factor, HurstParams};
use crate::linalg::ShiftedSolver;
use crate::quadrature::{gauss_legendre, power_product_integral, PowerFactor};

/// Kernel of the form |u−v|^{−α} S(u,v) with S bounded and symmetric.
pub trait SplitKernel: Send + Sync {
    fn alpha(&self) -> f64;
    fn factor(&self, u: f64, v: f64) -> f64;
    /// True when S is constant; lets assembly skip factor evaluations.
    fn constant_factor(&self) -> Option<f64> {
        None
    }
}

/// κ(u,v) = H(2H−1)|u−v|^{2H−2}, H ∈ (½, 1].
#[derive(Debug, Clone, Copy)]
pub struct KappaKernel {
    pub h: f64,
}

impl SplitKernel for KappaKernel {
    fn alpha(&self) -> f64 {
        2.0 - 2.0 * self.h
    }
    fn factor(&self, _: f64, _: f64) -> f64 {
        self.h * (2.0 * self.h - 1.0)
    }
    fn constant_factor(&self) -> Option<f64> {
        Some(self.h * (2.0 * self.h - 1.0))
    }
}

/// β_H κ̄(u,v) on the unit square (H < ½).
#[derive(Debug, Clone, Copy)]
pub struct KappaBarKernel {
    pub h: f64,
    pub beta: f64,
}

impl SplitKernel for KappaBarKernel {
    fn alpha(&self) -> f64 {
        2.0 * self.h
    }
    fn factor(&self, u: f64, v: f64) -> f64 {
        self.beta * kappa_bar_factor(self.h, u, v)
    }
}

/// κ̃(u,v) = |u−v|^{−2H} χ(min/max) (H < ½).
#[derive(Debug, Clone, Copy)]
pub struct KappaTildeKernel {
    pub params: HurstParams,
}

impl SplitKernel for KappaTildeKernel {
    fn alpha(&self) -> f64 {
        2.0 * self.params.h
    }
    fn factor(&self, u: f64, v: f64) -> f64 {
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        if hi <= 0.0 {
            return 0.0;
        }
        chi(&self.params, lo / hi)
    }
}

/// |u−v|^{−α}·value; value = 0 gives the zero kernel.
#[derive(Debug, Clone, Copy)]
pub struct ConstantKernel {
    pub alpha: f64,
    pub value: f64,
}

impl SplitKernel for ConstantKernel {
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn factor(&self, _: f64, _: f64) -> f64 {
        self.value
    }
    fn constant_factor(&self) -> Option<f64> {
        Some(self.value)
    }
}

/// Moments of |u−v|^{−α} against the two hat functions of panel [a,b]:
/// returns (∫ (b−v)/w · |u−v|^{−α}, ∫ (v−a)/w · |u−v|^{−α}).
pub fn hat_moments(u: f64, a: f64, b: f64, alpha: f64) -> (f64, f64) {
    let w = b - a;
    let dist = if u < a { a - u } else if u > b { u - b } else { 0.0 };
    if dist >= 2.0 * w {
        let r = gauss_legendre(8);
        let (mut l, mut rr) = (0.0, 0.0);
        for (x, wt) in r.nodes.iter().zip(&r.weights) {
            let v = a + w * x;
            let k = wt * (u - v).abs().powf(-alpha);
            l += k * (1.0 - x);
            rr += k * x;
        }
        return (l * w, rr * w);
    }
    let e1 = 1.0 - alpha;
    let e2 = 2.0 - alpha;
    let f0 = |x: f64| x.signum() * x.abs().powf(e1) / e1;
    let f1 = |x: f64| x.abs().powf(e2) / e2;
    let (lo, hi) = (a - u, b - u);
    let i0 = f0(hi) - f0(lo);
    let i1 = f1(hi) - f1(lo) + (u - a) * i0;
    (i0 - i1 / w, i1 / w)
}

/// Nyström operator for one kernel on one mesh, with the factorisations needed to solve
/// shifted systems for many scalings.
pub struct UnitSolver {
    kernel: Arc<dyn SplitKernel>,
    pub mesh: UnitMesh,
    weights: DMatrix<f64>,
    g_op: ShiftedSolver,
    r_op: Option<ShiftedSolver>,
    /// S(u_i, 1): right-hand side of the weighted resolvent system.
    endpoint_factor: Vec<f64>,
}

impl std::fmt::Debug for UnitSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UnitSolver")
            .field("alpha", &self.kernel.alpha())
            .field("panels", &self.mesh.panels())
            .field("resolvent", &self.r_op.is_some())
            .finish()
    }
}

impl UnitSolver {
    pub fn new(kernel: Arc<dyn SplitKernel>, mesh: UnitMesh, with_resolvent: bool) -> Result<Self> {
        let alpha = kernel.alpha();
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Input(format!("diagonal exponent {alpha} outside [0,1)")));
        }
        let x = &mesh.nodes;
        let np = x.len();
        let factors = factor_table(kernel.as_ref(), x);
        let mut w = DMatrix::<f64>::zeros(np, np);
        for i in 0..np {
            for k in 0..np - 1 {
                let (l, r) = hat_moments(x[i], x[k], x[k + 1], alpha);
                w[(i, k)] += factors.get(i, k) * l;
                w[(i, k + 1)] += factors.get(i, k + 1) * r;
            }
        }
        let endpoint_factor: Vec<f64> = (0..np).map(|i| factors.get(i, np - 1)).collect();
        let r_op = if with_resolvent {
            Some(ShiftedSolver::new(resolvent_matrix(alpha, x, &factors)))
        } else {
            None
        };
        let g_op = ShiftedSolver::new(w.clone());
        Ok(Self { kernel, mesh, weights: w, g_op, r_op, endpoint_factor })
    }

    pub fn alpha(&self) -> f64 {
        self.kernel.alpha()
    }

    pub fn kernel(&self) -> &dyn SplitKernel {
        self.kernel.as_ref()
    }

    /// Solve (μI + W) y = rhs on the mesh nodes.
    pub fn solve(&self, mu: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        self.g_op.solve(mu, rhs)
    }

    /// Apply the discrete operator: (W y)_i ≈ ∫ K(u_i, v) y(v) dv.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let v = &self.weights * nalgebra::DVector::from_column_slice(y);
        v.iter().copied().collect()
    }

    /// Weighted resolvent ρ(u) = (1−u)^α r(u) of
    /// r(u) + λ ∫₀¹ K(v,u) r(v) dv = −K(u,1).
    pub fn solve_resolvent(&self, lambda: f64) -> Result<Vec<f64>> {
        let op = self
            .r_op
            .as_ref()
            .ok_or_else(|| Error::Input("solver was built without the resolvent operator".into()))?;
        let mu = 1.0 / lambda;
        let rhs: Vec<f64> = self.endpoint_factor.iter().map(|s| -mu * s).collect();
        op.solve(mu, &rhs)
    }

    /// r(u) for u ∈ [0,1) from the weighted nodal values.
    pub fn resolvent_value(&self, rho: &[f64], u: f64, one_minus_u: f64) -> f64 {
        one_minus_u.powf(-self.alpha()) * self.mesh.interp(rho, u)
    }

    /// Extension of the resolvent beyond the unit interval (w > 1):
    /// r(w) = −K(w,1) − λ ∫₀¹ r(v) K(v,w) dv.
    pub fn extended_resolvent(&self, rho: &[f64], lambda: f64, w: f64, w_minus_one: f64) -> f64 {
        let alpha = self.alpha();
        let x = &self.mesh.nodes;
        let k = self.kernel.as_ref();
        // below this gap the two endpoint factors merge in floating point; the integral term is
        // O((w−1)^{1−2α}) there, negligible next to the leading (w−1)^{−α} term
        let gap = w_minus_one.max(1e-13);
        let mut integral = 0.0;
        for p in 0..x.len() - 1 {
            let (a, b) = (x[p], x[p + 1]);
            let fa = rho[p] * k.factor(a, w);
            let fb = rho[p + 1] * k.factor(b, w);
            let width = b - a;
            let factors = [
                PowerFactor { point: 1.0, exponent: -alpha },
                PowerFactor { point: 1.0 + gap, exponent: -alpha },
            ];
            integral += power_product_integral(a, b, &factors, &|v| fa + (fb - fa) * (v - a) / width);
        }
        -k.factor(w, 1.0) * w_minus_one.powf(-alpha) - lambda * integral
    }
}

enum FactorTable {
    Constant(f64),
    Dense(DMatrix<f64>),
}

impl FactorTable {
    fn get(&self, i: usize, k: usize) -> f64 {
        match self {
            FactorTable::Constant(c) => *c,
            FactorTable::Dense(m) => m[(i, k)],
        }
    }
}

fn factor_table(kernel: &dyn SplitKernel, x: &[f64]) -> FactorTable {
    if let Some(c) = kernel.constant_factor() {
        return FactorTable::Constant(c);
    }
    let np = x.len();
    let mut m = DMatrix::<f64>::zeros(np, np);
    for i in 0..np {
        for k in i..np {
            let v = kernel.factor(x[i], x[k]);
            m[(i, k)] = v;
            m[(k, i)] = v;
        }
    }
    FactorTable::Dense(m)
}

/// Rows i < m: (1−u_i)^α S(u_i,x_k) ∫ hat_k(v) |u_i−v|^{−α} (1−v)^{−α} dv. Row m is zero,
/// which pins ρ(1) = −S(1,1).
fn resolvent_matrix(alpha: f64, x: &[f64], factors: &FactorTable) -> DMatrix<f64> {
    let np = x.len();
    let mut w = DMatrix::<f64>::zeros(np, np);
    for i in 0..np - 1 {
        let scale = (1.0 - x[i]).powf(alpha);
        let sing = [
            PowerFactor { point: x[i], exponent: -alpha },
            PowerFactor { point: 1.0, exponent: -alpha },
        ];
        for k in 0..np - 1 {
            let (a, b) = (x[k], x[k + 1]);
            let width = b - a;
            let l = power_product_integral(a, b, &sing, &|v| (b - v) / width);
            let r = power_product_integral(a, b, &sing, &|v| (v - a) / width);
            w[(i, k)] += scale * factors.get(i, k) * l;
            w[(i, k + 1)] += scale * factors.get(i, k + 1) * r;
        }
    }
    w
}
