use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mesh::Grid;
use super::nystrom::{hat_moments, UnitSolver};
use super::{route_solver, unit_column, SolverSettings};
use crate::error::{Error, Result};
use crate::fractional_kernels::{constants, HurstParams};

/// Which equation produces the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyRoute {
    /// H = ½: g ≡ ½.
    Half,
    /// H = 1: g(s,t) = 1/(1+t).
    Unit,
    /// H ∈ (½,1): kernel κ.
    Kappa,
    /// H < ½: kernel β_H κ̄ with the c_H s^{½−H}(t−s)^{½−H} right-hand side.
    KappaBar,
    /// H < ½: the transformed equation with kernel κ̃.
    KappaTilde,
}

impl FamilyRoute {
    pub fn for_h(h: f64) -> Self {
        if h == 0.5 {
            FamilyRoute::Half
        } else if h == 1.0 {
            FamilyRoute::Unit
        } else if h > 0.5 {
            FamilyRoute::Kappa
        } else {
            FamilyRoute::KappaBar
        }
    }
}

/// Fields obtained from the resolvent: ġ, R and G.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivedFields {
    /// g_dot[j][i] = ∂_t g(s_i, t_j), i < j.
    pub g_dot: Vec<Vec<f64>>,
    /// r[j][i] = R(s_i, t_j), i < j.
    pub r: Vec<Vec<f64>>,
    /// Panel averages of R(·, t_j) over [s_i, s_{i+1}], i < j.
    pub r_panel: Vec<Vec<f64>>,
    /// big_g[j][i] = G(m_i, t_j) at panel midpoints m_i, i < j. Empty for the tilde route.
    pub big_g: Vec<Vec<f64>>,
}

/// The kernel family g(s,t) on a triangular grid, one unit solve per column.
#[derive(Debug, Clone, Serialize)]
pub struct KernelFamily {
    pub params: HurstParams,
    pub route: FamilyRoute,
    pub grid: Grid,
    pub settings: SolverSettings,
    /// g[j][i] = g(s_i, t_j) for i ≤ j.
    pub g: Vec<Vec<f64>>,
    pub g_diag: Vec<f64>,
    /// g_panel[j][i]: average of g(·, t_j) over [s_i, s_{i+1}], i < j.
    pub g_panel: Vec<Vec<f64>>,
    /// g(m_i, m_i) at panel midpoints.
    pub g_mid_diag: Vec<f64>,
    /// ∫₀^{t_j} g(s, t_j) ds.
    pub bracket: Vec<f64>,
    pub derived: Option<DerivedFields>,
    #[serde(skip)]
    solver: Arc<UnitSolver>,
}

/// Family for the original process: κ for H > ½, κ̄ for H < ½, closed forms at ½ and 1.
pub fn solve_g_family(h: f64, t_end: f64, n: usize) -> Result<KernelFamily> {
    KernelFamily::build(h, FamilyRoute::for_h(h), t_end, n, SolverSettings::default())
}

/// Family of the transformed equation with kernel κ̃ (H < ½).
pub fn solve_g_tilde_family(h: f64, t_end: f64, n: usize) -> Result<KernelFamily> {
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::Domain(format!("the tilde family needs H in (0, 1/2), got {h}")));
    }
    KernelFamily::build(h, FamilyRoute::KappaTilde, t_end, n, SolverSettings::default())
}

/// g̃(·, t) on a uniform grid of n panels together with R̃(·, t), as a one-column family.
pub fn solve_g_tilde(h: f64, t: f64, n: usize) -> Result<KernelFamily> {
    let mut f = solve_g_tilde_family(h, t, n)?;
    f.populate_derivatives()?;
    Ok(f)
}

/// ∂_t g(s_i, t_j) for i < j from the resolvent equation (no differencing across columns).
pub fn solve_g_dot(family: &KernelFamily, j: usize) -> Result<Vec<f64>> {
    if j == 0 || j > family.grid.n {
        return Err(Error::Input(format!("column {j} is not an interior node")));
    }
    let (_, gd) = family.resolvent_column(j)?;
    Ok(gd)
}

impl KernelFamily {
    pub fn build(h: f64, route: FamilyRoute, t_end: f64, n: usize, settings: SolverSettings) -> Result<Self> {
        let params = constants(h)?;
        let grid = Grid::new(n, t_end)?;
        let solver = route_solver(route, h, n, &settings, false)?;
        let mesh = &solver.mesh;
        let g_zero = match route {
            FamilyRoute::Half => 0.5,
            FamilyRoute::KappaBar => 0.0,
            _ => 1.0,
        };

        let columns: Vec<(Vec<f64>, f64, Vec<f64>, f64)> = (0..=n)
            .into_par_iter()
            .map(|j| -> Result<_> {
                if j == 0 {
                    return Ok((vec![g_zero], g_zero, Vec::new(), 0.0));
                }
                let t = grid.nodes[j];
                let y = unit_column(&solver, route, &params, t)?;
                let jf = j as f64;
                let col: Vec<f64> = (0..=j).map(|i| mesh.interp(&y, i as f64 / jf)).collect();
                let panel: Vec<f64> =
                    (0..j).map(|i| jf * mesh.integral(&y, i as f64 / jf, (i + 1) as f64 / jf)).collect();
                let bracket = t * mesh.integral(&y, 0.0, 1.0);
                Ok((col, y[y.len() - 1], panel, bracket))
            })
            .collect::<Result<_>>()?;

        let g_mid_diag: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let y = unit_column(&solver, route, &params, grid.midpoint(i))?;
                Ok(y[y.len() - 1])
            })
            .collect::<Result<_>>()?;

        let mut g = Vec::with_capacity(n + 1);
        let mut g_diag = Vec::with_capacity(n + 1);
        let mut g_panel = Vec::with_capacity(n + 1);
        let mut bracket = Vec::with_capacity(n + 1);
        for (c, d, p, b) in columns {
            g.push(c);
            g_diag.push(d);
            g_panel.push(p);
            bracket.push(b);
        }
        if matches!(route, FamilyRoute::Kappa | FamilyRoute::KappaTilde) && g_diag.iter().any(|&d| d <= 0.0) {
            return Err(Error::Invariant("g(t,t) must be positive on this route".into()));
        }
        Ok(Self { params, route, grid, settings, g, g_diag, g_panel, g_mid_diag, bracket, derived: None, solver })
    }

    pub fn h(&self) -> f64 {
        self.params.h
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn solver(&self) -> &UnitSolver {
        &self.solver
    }

    /// g(s, s) at an arbitrary time by a fresh unit solve.
    pub fn diag_at(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(self.g_diag[0]);
        }
        let y = unit_column(&self.solver, self.route, &self.params, s)?;
        Ok(y[y.len() - 1])
    }

    /// ∫₀^{t_j} g²(s,s) ds: Simpson on each grid panel, geometric refinement on the first one
    /// where g(s,s) has an s^{2H−1}-type profile.
    pub fn diag_square_integral(&self, j: usize) -> Result<f64> {
        let h = self.grid.step();
        let mut total = 0.0;
        for i in 1..j {
            let (a, m, b) = (self.g_diag[i], self.g_mid_diag[i], self.g_diag[i + 1]);
            total += h / 6.0 * (a * a + 4.0 * m * m + b * b);
        }
        if j >= 1 {
            let mut hi = h;
            let mut f_hi = self.g_diag[1];
            for _ in 0..48 {
                let lo = 0.5 * hi;
                let f_lo = self.diag_at(lo)?;
                let f_mid = self.diag_at(0.75 * hi)?;
                total += (hi - lo) / 6.0 * (f_lo * f_lo + 4.0 * f_mid * f_mid + f_hi * f_hi);
                hi = lo;
                f_hi = f_lo;
            }
            total += hi * f_hi * f_hi;
        }
        Ok(total)
    }

    /// Weighted resolvent solve for column j; returns (R(s_i,t_j), ġ(s_i,t_j)) for i < j.
    fn resolvent_column(&self, j: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let t = self.grid.nodes[j];
        let gtt = self.g_diag[j];
        match self.route {
            FamilyRoute::Half => Ok((vec![0.0; j], vec![0.0; j])),
            FamilyRoute::Unit => Ok((vec![-1.0 / (1.0 + t); j], vec![-1.0 / ((1.0 + t) * (1.0 + t)); j])),
            FamilyRoute::KappaBar => Err(Error::Domain(
                "derivative fields for H < 1/2 come from the tilde family".into(),
            )),
            FamilyRoute::Kappa | FamilyRoute::KappaTilde => {
                let solver = self.resolvent_solver()?;
                let alpha = solver.alpha();
                let rho = solver.solve_resolvent(t.powf(1.0 - alpha))?;
                let scale = t.powf(-alpha);
                let jf = j as f64;
                let r: Vec<f64> = (0..j)
                    .map(|i| scale * solver.resolvent_value(&rho, i as f64 / jf, (j - i) as f64 / jf))
                    .collect();
                let gd = r.iter().map(|v| v * gtt).collect();
                Ok((r, gd))
            }
        }
    }

    fn resolvent_solver(&self) -> Result<Arc<UnitSolver>> {
        route_solver(self.route, self.params.h, self.grid.n, &self.settings, true)
    }

    /// Fill ġ, R, panel averages of R and G (the latter for H ≥ ½ only).
    pub fn populate_derivatives(&mut self) -> Result<()> {
        if self.derived.is_some() {
            return Ok(());
        }
        let n = self.grid.n;
        let hstep = self.grid.step();
        let fields = match self.route {
            FamilyRoute::KappaBar => {
                return Err(Error::Domain("derivative fields for H < 1/2 come from the tilde family".into()))
            }
            FamilyRoute::Half | FamilyRoute::Unit => {
                let mut g_dot = vec![Vec::new()];
                let mut r = vec![Vec::new()];
                let mut big_g = vec![Vec::new()];
                for j in 1..=n {
                    let (rc, gd) = self.resolvent_column(j)?;
                    let t = self.grid.nodes[j];
                    let gv = if self.route == FamilyRoute::Half { 2.0 } else { 1.0 + t };
                    g_dot.push(gd);
                    r.push(rc);
                    big_g.push(vec![gv; j]);
                }
                DerivedFields { g_dot, r_panel: r.clone(), r, big_g }
            }
            FamilyRoute::Kappa | FamilyRoute::KappaTilde => {
                let solver = self.resolvent_solver()?;
                let alpha = solver.alpha();
                let mesh = &solver.mesh;
                let cols: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (1..=n)
                    .into_par_iter()
                    .map(|j| -> Result<_> {
                        let t = self.grid.nodes[j];
                        let rho = solver.solve_resolvent(t.powf(1.0 - alpha))?;
                        let scale = t.powf(-alpha);
                        let jf = j as f64;
                        let gtt = self.g_diag[j];
                        let r: Vec<f64> = (0..j)
                            .map(|i| scale * solver.resolvent_value(&rho, i as f64 / jf, (j - i) as f64 / jf))
                            .collect();
                        let gd = r.iter().map(|v| v * gtt).collect();
                        let panel = (0..j)
                            .map(|i| {
                                jf * scale * mesh.weighted_integral(&rho, i as f64 / jf, (i + 1) as f64 / jf, alpha)
                            })
                            .collect();
                        Ok((gd, r, panel))
                    })
                    .collect::<Result<_>>()?;
                let mut g_dot = vec![Vec::new()];
                let mut r = vec![Vec::new()];
                let mut r_panel = vec![Vec::new()];
                for (a, b, c) in cols {
                    g_dot.push(a);
                    r.push(b);
                    r_panel.push(c);
                }
                let big_g = if self.route == FamilyRoute::Kappa {
                    self.big_g_field(&solver)?
                } else {
                    Vec::new()
                };
                DerivedFields { g_dot, r, r_panel, big_g }
            }
        };
        let _ = hstep;
        self.derived = Some(fields);
        Ok(())
    }

    /// G(m_i, t_j) for i < j through
    /// G(s,t) = [1 + H(t−s)^{2H−1} + H s^{4H−2} I_s(t/s)] / g(s,s),
    /// I_s(w) = ∫₀¹ (1−v)^{−α} ρ_s(v) [(w−v)^{2H−1} − (1−v)^{2H−1}] dv,
    /// which follows from integrating the resolvent equation in its first argument.
    fn big_g_field(&self, solver: &UnitSolver) -> Result<Vec<Vec<f64>>> {
        let n = self.grid.n;
        let h = self.params.h;
        let alpha = solver.alpha();
        let e = 2.0 * h - 1.0;
        let x = &solver.mesh.nodes;
        let np = x.len();
        // exact hat moments against (1−v)^{−α} and (1−v)^{4H−3}
        let mut w_sing = vec![0.0; np];
        let mut w_stat = vec![0.0; np];
        for k in 0..np - 1 {
            let (l, r) = hat_moments(1.0, x[k], x[k + 1], alpha);
            w_sing[k] += l;
            w_sing[k + 1] += r;
            let (l, r) = hat_moments(1.0, x[k], x[k + 1], 3.0 - 4.0 * h);
            w_stat[k] += l;
            w_stat[k + 1] += r;
        }
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| -> Result<Vec<f64>> {
                let s = self.grid.midpoint(i);
                let gss = self.g_mid_diag[i];
                let rho = solver.solve_resolvent(s.powf(1.0 - alpha))?;
                let stat: f64 = rho.iter().zip(&w_stat).map(|(r, w)| r * w).sum();
                let coef: Vec<f64> = rho.iter().zip(&w_sing).map(|(r, w)| r * w).collect();
                let sfac = h * s.powf(4.0 * h - 2.0);
                Ok((i + 1..=n)
                    .map(|j| {
                        let t = self.grid.nodes[j];
                        let w = t / s;
                        let dyn_part: f64 = coef.iter().zip(x).map(|(c, v)| c * (w - v).powf(e)).sum();
                        (1.0 + h * (t - s).powf(e) + sfac * (dyn_part - stat)) / gss
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        // transpose to column-major [j][i]
        let mut big_g: Vec<Vec<f64>> = (0..=n).map(Vec::with_capacity).collect();
        for (i, row) in rows.into_iter().enumerate() {
            for (k, v) in row.into_iter().enumerate() {
                big_g[i + 1 + k].push(v);
            }
        }
        Ok(big_g)
    }

    /// G(s, t) at an arbitrary s < t from its definition 1 − (1/g(s,s)) ∫₀ᵗ R(τ, s) dτ, using
    /// the extension of R beyond τ = s. Slow; used for cross-checks.
    pub fn big_g_by_definition(&self, s: f64, t: f64) -> Result<f64> {
        if self.route != FamilyRoute::Kappa {
            return Err(Error::Domain("G by definition is implemented for H in (1/2, 1)".into()));
        }
        let solver = self.resolvent_solver()?;
        let alpha = solver.alpha();
        let lambda = s.powf(1.0 - alpha);
        let rho = solver.solve_resolvent(lambda)?;
        let gss = self.diag_at(s)?;
        let scale = s.powf(-alpha);
        // τ ∈ [0, s]: s · s^{−α} ∫₀¹ (1−u)^{−α} ρ(u) du
        let inner = s * scale * solver.mesh.weighted_integral(&rho, 0.0, 1.0, alpha);
        // τ ∈ [s, t]: τ = s w
        let outer = crate::quadrature::tanh_sinh(
            |w, dl, _| scale * s * solver.extended_resolvent(&rho, lambda, w, dl),
            1.0,
            t / s,
            1e-10,
        );
        Ok(1.0 - (inner + outer) / gss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_family_is_constant() {
        let mut f = solve_g_family(0.5, 2.0, 16).unwrap();
        f.populate_derivatives().unwrap();
        for j in 0..=16 {
            assert!(f.g[j].iter().all(|g| *g == 0.5));
            assert!((f.bracket[j] - f.grid.nodes[j] / 2.0).abs() < 1e-14);
        }
        let d = f.derived.unwrap();
        assert!(d.big_g[16].iter().all(|g| *g == 2.0));
    }

    #[test]
    fn unit_family_closed_form() {
        let mut f = solve_g_family(1.0, 1.0, 8).unwrap();
        f.populate_derivatives().unwrap();
        assert!(f.g[8].iter().all(|g| (g - 0.5).abs() < 1e-15));
        assert_eq!(f.derived.unwrap().big_g[8][3], 2.0);
    }

    #[test]
    fn bracket_matches_diag_square_integral() {
        let f = solve_g_family(0.75, 1.0, 64).unwrap();
        let a = f.bracket[64];
        let b = f.diag_square_integral(64).unwrap();
        assert!((a - b).abs() < 2e-3 * a, "{a} {b}");
    }

    #[test]
    fn big_g_formula_matches_definition() {
        let mut f = solve_g_family(0.8, 1.0, 32).unwrap();
        f.populate_derivatives().unwrap();
        let d = f.derived.as_ref().unwrap();
        for (i, j) in [(3, 20), (10, 32), (15, 16), (0, 5)] {
            let s = f.grid.midpoint(i);
            let t = f.grid.nodes[j];
            let direct = f.big_g_by_definition(s, t).unwrap();
            let fast = d.big_g[j][i];
            assert!((direct - fast).abs() < 2e-3 * direct.abs(), "({i},{j}) {direct} {fast}");
        }
    }

    #[test]
    fn big_g_on_the_diagonal_is_inverse_g() {
        let f = solve_g_family(0.7, 1.0, 16).unwrap();
        let s = 0.4;
        let gss = f.diag_at(s).unwrap();
        let direct = f.big_g_by_definition(s, s * (1.0 + 1e-9)).unwrap();
        assert!((direct - 1.0 / gss).abs() < 2e-3, "{direct} {}", 1.0 / gss);
    }

    #[test]
    fn small_h_diag_vanishes() {
        let f = solve_g_family(0.3, 1.0, 16).unwrap();
        assert!(f.g_diag.iter().all(|d| d.abs() < 1e-12));
        assert!(f.bracket.windows(2).all(|w| w[1] >= w[0]));
    }
}
