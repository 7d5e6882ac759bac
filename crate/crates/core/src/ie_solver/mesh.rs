use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of panels accepted for any grid.
pub const MIN_PANELS: usize = 8;
/// Upper bound on grid size (dense O(n²)–O(n³) work).
pub const MAX_PANELS: usize = 4096;

/// Uniform partition of [0, t_end] with n panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub t_end: f64,
    pub nodes: Vec<f64>,
    pub unit_nodes: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize, t_end: f64) -> Result<Self> {
        if n < MIN_PANELS {
            return Err(Error::Input(format!("grid needs at least {MIN_PANELS} panels, got {n}")));
        }
        if n > MAX_PANELS {
            return Err(Error::Input(format!("grid size {n} exceeds the cap {MAX_PANELS}")));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::Domain(format!("horizon must be positive and finite, got {t_end}")));
        }
        let unit_nodes: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        let nodes = unit_nodes.iter().map(|u| u * t_end).collect();
        Ok(Self { n, t_end, nodes, unit_nodes })
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.n as f64
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.step()
    }
}

/// Graded mesh on [0,1], symmetric about ½, refined towards both endpoints:
/// x_k = ½(2k/m)^q on the left half, mirrored on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitMesh {
    pub nodes: Vec<f64>,
    pub grading: f64,
}

impl UnitMesh {
    pub fn graded(m: usize, q: f64) -> Result<Self> {
        if m < MIN_PANELS {
            return Err(Error::Input(format!("mesh needs at least {MIN_PANELS} panels, got {m}")));
        }
        if m > MAX_PANELS {
            return Err(Error::Input(format!("mesh size {m} exceeds the cap {MAX_PANELS}")));
        }
        if !(q >= 1.0) {
            return Err(Error::Input(format!("grading exponent must be >= 1, got {q}")));
        }
        let mf = m as f64;
        let nodes = (0..=m)
            .map(|k| {
                if 2 * k <= m {
                    0.5 * (2.0 * k as f64 / mf).powf(q)
                } else {
                    1.0 - 0.5 * (2.0 * (m - k) as f64 / mf).powf(q)
                }
            })
            .collect();
        Ok(Self { nodes, grading: q })
    }

    pub fn panels(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Panel index k with x_k ≤ u ≤ x_{k+1} and the local coordinate θ ∈ [0,1].
    pub fn locate(&self, u: f64) -> (usize, f64) {
        let m = self.panels();
        if u <= 0.0 {
            return (0, 0.0);
        }
        if u >= 1.0 {
            return (m - 1, 1.0);
        }
        let k = match self.nodes.binary_search_by(|x| x.partial_cmp(&u).unwrap()) {
            Ok(k) => k.min(m - 1),
            Err(k) => k - 1,
        };
        let (a, b) = (self.nodes[k], self.nodes[k + 1]);
        (k, (u - a) / (b - a))
    }

    /// Linear interpolation of nodal values.
    pub fn interp(&self, vals: &[f64], u: f64) -> f64 {
        let (k, th) = self.locate(u);
        vals[k] * (1.0 - th) + vals[k + 1] * th
    }

    /// Exact integral of the piecewise-linear interpolant over [a, b] ⊂ [0,1].
    pub fn integral(&self, vals: &[f64], a: f64, b: f64) -> f64 {
        self.pieces(vals, a, b, |lo, hi, ylo, yhi| 0.5 * (ylo + yhi) * (hi - lo))
    }

    /// Exact integral of (1−u)^{−α} times the piecewise-linear interpolant over [a, b].
    pub fn weighted_integral(&self, vals: &[f64], a: f64, b: f64, alpha: f64) -> f64 {
        self.pieces(vals, a, b, |lo, hi, ylo, yhi| {
            // z = 1 − u; y = ylo + q (u − lo) = (ylo + q(1−lo)) − q z
            let q = if hi > lo { (yhi - ylo) / (hi - lo) } else { 0.0 };
            let (za, zb) = (1.0 - hi, 1.0 - lo);
            let p0 = ylo + q * (1.0 - lo);
            let e1 = 1.0 - alpha;
            let e2 = 2.0 - alpha;
            if (zb - za) < 0.05 * za {
                // far from the singular end: 3-point Gauss on the smooth integrand
                let c = 0.5 * (za + zb);
                let d = 0.5 * (zb - za);
                let r = (0.6f64).sqrt();
                let f = |z: f64| z.powf(-alpha) * (p0 - q * z);
                d * (5.0 * f(c - r * d) + 8.0 * f(c) + 5.0 * f(c + r * d)) / 9.0
            } else {
                p0 * (zb.powf(e1) - za.powf(e1)) / e1 - q * (zb.powf(e2) - za.powf(e2)) / e2
            }
        })
    }

    fn pieces<F: Fn(f64, f64, f64, f64) -> f64>(&self, vals: &[f64], a: f64, b: f64, f: F) -> f64 {
        if b <= a {
            return 0.0;
        }
        let (ka, _) = self.locate(a);
        let (kb, _) = self.locate(b);
        let mut s = 0.0;
        for k in ka..=kb {
            let lo = a.max(self.nodes[k]);
            let hi = b.min(self.nodes[k + 1]);
            if hi <= lo {
                continue;
            }
            let (x0, x1) = (self.nodes[k], self.nodes[k + 1]);
            let w = x1 - x0;
            let ylo = vals[k] + (vals[k + 1] - vals[k]) * (lo - x0) / w;
            let yhi = vals[k] + (vals[k + 1] - vals[k]) * (hi - x0) / w;
            s += f(lo, hi, ylo, yhi);
        }
        s
    }
}
