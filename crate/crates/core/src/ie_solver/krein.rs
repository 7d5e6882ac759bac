//! Residuals of the resolvent identities, evaluated pointwise with fresh unit solves.

use super::Resolvent;
use crate::error::Result;
use crate::quadrature::gauss_jacobi;

const NODES: usize = 32;

/// ∫_a^b f with the singular weight (x−a)^{−p}(b−x)^{−q} divided out of the rule.
fn singular_integral<F: FnMut(f64) -> Result<f64>>(a: f64, b: f64, p: f64, q: f64, mut f: F) -> Result<f64> {
    let rule = gauss_jacobi(NODES, -p, -q);
    let w = b - a;
    let mut s = 0.0;
    for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
        let v = a + w * x;
        s += wt * f(v)? * x.powf(p) * (1.0 - x).powf(q);
    }
    Ok(s * w)
}

/// Relative residual of R(s,t) − R(t,s) = ∫_s^t R(s,τ) R(t,τ) dτ for s < t,
/// normalised by the largest of the three terms.
pub fn antisymmetry_residual(r: &Resolvent, s: f64, t: f64) -> Result<f64> {
    let (s, t) = if s < t { (s, t) } else { (t, s) };
    let alpha = r.solver().alpha();
    let a = r.eval(s, t)?;
    let b = r.eval(t, s)?;
    let c = singular_integral(s, t, alpha, alpha, |tau| Ok(r.eval(s, tau)? * r.eval(t, tau)?))?;
    let scale = a.abs().max(b.abs()).max(c.abs());
    Ok((a - b - c).abs() / scale)
}

/// Relative residual of −R(t,s) + ∫₀ˢ R(t,r) R(s,r) dr = K(t,s), with `kernel` = K(t,s).
pub fn resolvent_product_residual(r: &Resolvent, s: f64, t: f64, kernel: f64) -> Result<f64> {
    let alpha = r.solver().alpha();
    let a = -r.eval(t, s)?;
    // the integrand is singular at r = s (and at r = t when t < s)
    let c = if t > s {
        singular_integral(0.0, s, 0.0, alpha, |x| Ok(r.eval(t, x)? * r.eval(s, x)?))?
    } else {
        singular_integral(0.0, t, 0.0, alpha, |x| Ok(r.eval(t, x)? * r.eval(s, x)?))?
            + singular_integral(t, s, alpha, alpha, |x| Ok(r.eval(t, x)? * r.eval(s, x)?))?
    };
    let scale = a.abs().max(c.abs()).max(kernel.abs());
    Ok((a + c - kernel).abs() / scale)
}
