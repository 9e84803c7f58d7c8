//! Jacobi-preconditioned conjugate gradients for symmetric positive
//! definite systems.

use super::SolveError;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `|b - A x| / |b|`, recomputed from the returned `x`.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Stops once the recursive residual falls below `tolerance * |b|`; the
/// residual is recomputed from scratch every `REPLACE_EVERY` iterations so
/// rounding drift cannot fake convergence.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<CgOutcome, SolveError> {
    const REPLACE_EVERY: usize = 100;
    let n = b.len();
    assert_eq!(a.nrows(), n);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let target = tolerance * bnorm;

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut it = 0;
    while it < max_iterations {
        if norm(&r) <= target {
            break;
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SolveError::Breakdown { iteration: it });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        it += 1;
        if it % REPLACE_EVERY == 0 {
            a.mul_vec_into(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    a.mul_vec_into(&x, &mut ap);
    let true_res = ap
        .iter()
        .zip(b)
        .map(|(ax, bi)| (bi - ax).powi(2))
        .sum::<f64>()
        .sqrt()
        / bnorm;
    // the recursive residual may undershoot the true one by rounding only
    if true_res > 100.0 * tolerance.max(f64::EPSILON) {
        return Err(SolveError::NoConvergence {
            iterations: it,
            relative_residual: true_res,
        });
    }
    Ok(CgOutcome {
        x,
        iterations: it,
        relative_residual: true_res,
    })
}
