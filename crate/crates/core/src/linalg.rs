//! Dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Reduces a fixed matrix W to Hessenberg form once so that every shifted system
/// (μI + W) y = b costs O(m²).
#[derive(Debug, Clone)]
pub struct ShiftedSolver {
    n: usize,
    q: DMatrix<f64>,
    /// Hessenberg factor, row-major.
    hess: Vec<f64>,
}

impl ShiftedSolver {
    pub fn new(w: DMatrix<f64>) -> Self {
        let n = w.nrows();
        let dec = nalgebra::linalg::Hessenberg::new(w);
        let (q, h) = dec.unpack();
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                hess[i * n + j] = h[(i, j)];
            }
        }
        Self { n, q, hess }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve (μI + W) y = b.
    pub fn solve(&self, mu: f64, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::Input(format!("rhs length {} != system size {n}", b.len())));
        }
        let z = self.q.tr_mul(&DVector::from_column_slice(b));
        let mut a = self.hess.clone();
        for i in 0..n {
            a[i * n + i] += mu;
        }
        let mut x: Vec<f64> = z.iter().copied().collect();
        let mut max_piv: f64 = 0.0;
        let mut min_piv = f64::INFINITY;
        for k in 0..n {
            if k + 1 < n {
                let (p, q) = (a[k * n + k], a[(k + 1) * n + k]);
                if q.abs() > p.abs() {
                    for j in k..n {
                        a.swap(k * n + j, (k + 1) * n + j);
                    }
                    x.swap(k, k + 1);
                }
            }
            let piv = a[k * n + k];
            max_piv = max_piv.max(piv.abs());
            min_piv = min_piv.min(piv.abs());
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::Numerical(format!("singular Nyström system (zero pivot at row {k})")));
            }
            if k + 1 < n {
                let l = a[(k + 1) * n + k] / piv;
                if l != 0.0 {
                    for j in k..n {
                        a[(k + 1) * n + j] -= l * a[k * n + j];
                    }
                    x[k + 1] -= l * x[k];
                }
            }
        }
        if min_piv / max_piv < 1e-14 {
            return Err(Error::Numerical(format!(
                "ill-conditioned Nyström system (pivot ratio {:.3e})",
                min_piv / max_piv
            )));
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..n {
                s -= a[k * n + j] * x[j];
            }
            x[k] = s / a[k * n + k];
        }
        let y = &self.q * DVector::from_vec(x);
        Ok(y.iter().copied().collect())
    }
}

/// Lower Cholesky factor, retrying once with a 1e−12 relative diagonal jitter.
pub fn cholesky_with_jitter(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = m.clone().cholesky() {
        return Ok(c.l());
    }
    let scale = (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut j = m;
    for i in 0..j.nrows() {
        j[(i, i)] += 1e-12 * scale;
    }
    j.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Numerical("covariance matrix is not positive definite".into()))
}

/// Solve the symmetric positive definite system A x = b (with jitter fallback).
pub fn spd_solve(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let l = cholesky_with_jitter(a)?;
    let chol = nalgebra::linalg::Cholesky::pack_dirty(l);
    let x = chol.solve(&DVector::from_column_slice(b));
    Ok(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_solve_matches_lu() {
        let n = 30;
        let w = DMatrix::from_fn(n, n, |i, j| 1.0 / (1.0 + (i as f64 - j as f64).abs()) + 0.01 * (i * j) as f64);
        let solver = ShiftedSolver::new(w.clone());
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        for mu in [0.3, 1.0, 7.5] {
            let y = solver.solve(mu, &b).unwrap();
            let a = DMatrix::identity(n, n) * mu + &w;
            let x = a.lu().solve(&DVector::from_column_slice(&b)).unwrap();
            for i in 0..n {
                assert!((y[i] - x[i]).abs() < 1e-10 * (1.0 + x[i].abs()));
            }
        }
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let m = &v * v.transpose();
        assert!(cholesky_with_jitter(m).is_ok());
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(cholesky_with_jitter(bad).is_err());
    }
}
