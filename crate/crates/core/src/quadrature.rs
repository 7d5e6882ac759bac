//! Quadrature toolkit: Gauss–Legendre, Gauss–Jacobi (Golub–Welsch), a double-exponential
//! rule for endpoint singularities, and a panel integrator for products of power singularities.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::special::beta;

/// Nodes and weights of a rule on [0, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Apply the rule mapped onto [a, b] (no weight function rescaling beyond the length).
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let w = b - a;
        let mut s = 0.0;
        for (x, wt) in self.nodes.iter().zip(&self.weights) {
            s += wt * f(a + w * x);
        }
        s * w
    }
}

fn legendre_rule(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map from [-1,1] to [0,1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    GaussRule { nodes, weights }
}

/// Gauss–Legendre rule with `n` points on [0, 1] (cached).
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n).or_insert_with(|| Arc::new(legendre_rule(n))).clone()
}

fn jacobi_rule(n: usize, p: f64, q: f64) -> GaussRule {
    // weight (1-ξ)^a (1+ξ)^b on [-1,1]; x = (1+ξ)/2 gives x^p (1-x)^q with b = p, a = q.
    let (a, b) = (q, p);
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        let diag = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        jm[(k, k)] = diag;
        if k + 1 < n {
            let j = kf + 1.0;
            let sj = 2.0 * j + a + b;
            let off = if j == 1.0 {
                (4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b))).sqrt()
            } else {
                (4.0 * j * (j + a) * (j + b) * (j + a + b)
                    / (sj * sj * (sj + 1.0) * (sj - 1.0)))
                    .sqrt()
            };
            jm[(k, k + 1)] = off;
            jm[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(jm);
    // total mass of x^p (1-x)^q on [0,1]
    let mu0 = beta(p + 1.0, q + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (1.0 + eig.eigenvalues[i]), mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Rule for ∫₀¹ x^p (1−x)^q f(x) dx with `n` points (cached by exponents).
pub fn gauss_jacobi(n: usize, p: f64, q: f64) -> Arc<GaussRule> {
    type Key = (usize, u64, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, p.to_bits(), q.to_bits());
    if let Some(r) = cache.lock().unwrap().get(&key) {
        return r.clone();
    }
    let rule = Arc::new(jacobi_rule(n, p, q));
    cache.lock().unwrap().insert(key, rule.clone());
    rule
}

/// Double-exponential (tanh-sinh) quadrature on [a, b].
///
/// The integrand receives `(x, x - a, b - x)`; the two distances are computed without
/// cancellation so endpoint singularities can be evaluated accurately.
pub fn tanh_sinh<F>(mut f: F, a: f64, b: f64, rel_tol: f64) -> f64
where
    F: FnMut(f64, f64, f64) -> f64,
{
    if b <= a {
        return 0.0;
    }
    const T_MAX: f64 = 4.5;
    const MAX_LEVEL: usize = 8;
    let len = b - a;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut eval = |t: f64| -> f64 {
        let u = half_pi * t.sinh();
        let dl = len / (1.0 + (-2.0 * u).exp());
        let dr = len / (1.0 + (2.0 * u).exp());
        if dl <= 0.0 || dr <= 0.0 {
            return 0.0;
        }
        let ch = u.cosh();
        let w = len * half_pi * t.cosh() / (2.0 * ch * ch);
        if w == 0.0 || !w.is_finite() {
            return 0.0;
        }
        let x = if dl < dr { a + dl } else { b - dr };
        let v = f(x, dl, dr);
        w * v
    };
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let kmax = (T_MAX / h) as i64;
    for k in 1..=kmax {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
    }
    let mut prev = sum * h;
    for _level in 1..=MAX_LEVEL {
        h *= 0.5;
        let kmax = (T_MAX / h) as i64;
        let mut k = 1;
        while k <= kmax {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
            k += 2;
        }
        let cur = sum * h;
        if (cur - prev).abs() <= rel_tol * cur.abs().max(1e-300) {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// A power factor |v − point|^exponent inside a panel integral.
#[derive(Debug, Clone, Copy)]
pub struct PowerFactor {
    pub point: f64,
    pub exponent: f64,
}

const PANEL_GL: usize = 10;
const PANEL_GJ: usize = 12;

/// ∫_a^b Π_k |v − p_k|^{e_k} · f(v) dv for smooth `f`.
///
/// Factors sitting on an endpoint are absorbed into a Gauss–Jacobi weight, factors well
/// separated from the panel are treated as smooth, and anything in between triggers
/// bisection towards the offending point.
pub fn power_product_integral<F: Fn(f64) -> f64>(
    a: f64,
    b: f64,
    factors: &[PowerFactor],
    f: &F,
) -> f64 {
    panel_rec(a, b, factors, f, 0)
}

fn panel_rec<F: Fn(f64) -> f64>(a: f64, b: f64, factors: &[PowerFactor], f: &F, depth: usize) -> f64 {
    let w = b - a;
    if w <= 0.0 {
        return 0.0;
    }
    let tiny = 1e-15 * w.max(a.abs()).max(b.abs());
    let mut ea = 0.0;
    let mut eb = 0.0;
    // 0 = smooth, 1 = absorbed at a, 2 = absorbed at b
    let mut class = [0u8; 8];
    assert!(factors.len() <= class.len());
    for (k, fac) in factors.iter().enumerate() {
        if fac.exponent == 0.0 {
            continue;
        }
        let p = fac.point;
        if (p - a).abs() <= tiny {
            class[k] = 1;
        } else if (p - b).abs() <= tiny {
            class[k] = 2;
        } else if p > a && p < b {
            return panel_rec(a, p, factors, f, depth + 1) + panel_rec(p, b, factors, f, depth + 1);
        } else {
            let d = if p < a { a - p } else { p - b };
            if d < w {
                // peel off a sub-panel as wide as its distance to the point
                let step = if d < 0.5 * w { d } else { 0.5 * w };
                let m = if p < a { a + step } else { b - step };
                if m > a && m < b && depth < 200 {
                    return panel_rec(a, m, factors, f, depth + 1) + panel_rec(m, b, factors, f, depth + 1);
                }
                class[k] = if p < a { 1 } else { 2 };
            }
        }
        match class[k] {
            1 => ea += fac.exponent,
            2 => eb += fac.exponent,
            _ => {}
        }
    }
    let smooth = |v: f64, dl: f64, dr: f64| -> f64 {
        let mut prod = f(v);
        for (k, fac) in factors.iter().enumerate() {
            if fac.exponent == 0.0 || class[k] != 0 {
                continue;
            }
            let p = fac.point;
            let d = if p <= a { (a - p) + dl } else { (p - b) + dr };
            prod *= d.powf(fac.exponent);
        }
        prod
    };
    let (rule, scale) = if ea == 0.0 && eb == 0.0 {
        (gauss_legendre(PANEL_GL), w)
    } else {
        (gauss_jacobi(PANEL_GJ, ea, eb), w.powf(1.0 + ea + eb))
    };
    let mut s = 0.0;
    for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
        let dl = w * x;
        let dr = w * (1.0 - x);
        s += wt * smooth(a + dl, dl, dr);
    }
    s * scale
}
