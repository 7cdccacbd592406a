//! Jacobi-preconditioned conjugate gradients for symmetric positive-definite
//! operators given as a matrix-vector product.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    /// Final `||b - A x|| / ||b||`.
    pub relative_residual: f64,
}

/// Solves `A x = b` starting from the contents of `x`.
pub fn pcg<F>(apply: F, diag: &[f64], b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> Result<CgOutcome>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome { iterations: 0, relative_residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    let mut res = norm(&r) / b_norm;
    if res <= rel_tol {
        return Ok(CgOutcome { iterations: 0, relative_residual: res });
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite(format!("p'Ap = {pap:e} at iteration {it}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / b_norm;
        if res <= rel_tol {
            // confirm against the true residual to guard against drift
            apply(x, &mut ap);
            let true_res = b.iter().zip(&ap).map(|(b, a)| (b - a) * (b - a)).sum::<f64>().sqrt() / b_norm;
            if true_res <= rel_tol {
                return Ok(CgOutcome { iterations: it, relative_residual: true_res });
            }
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: res })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal() {
        let n = 50;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut v = 3.0 * x[i];
                if i > 0 {
                    v -= x[i - 1];
                }
                if i + 1 < n {
                    v -= x[i + 1];
                }
                y[i] = v;
            }
        };
        let truth: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        apply(&truth, &mut b);
        let mut x = vec![0.0; n];
        let out = pcg(apply, &vec![3.0; n], &b, &mut x, 1e-12, 200).unwrap();
        assert!(out.relative_residual <= 1e-12);
        for (a, b) in x.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn reports_nonconvergence() {
        let apply = |x: &[f64], y: &mut [f64]| {
            y[0] = x[0];
            y[1] = 1e6 * x[1];
        };
        let mut x = vec![0.0; 2];
        let err = pcg(apply, &[1.0, 1.0], &[1.0, 1.0], &mut x, 1e-14, 1).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }
}
