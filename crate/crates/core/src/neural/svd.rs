//! Truncated SVD through the Gram matrix.
//!
//! For `W` (n × p, p small) the right singular vectors are the
//! eigenvectors of `WᵀW`, found with cyclic Jacobi rotations. The left
//! singular vectors follow as `U_k = W V_k Σ_k⁻¹`.

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Off-diagonal Frobenius norm at which Jacobi iteration stops, relative to
/// the matrix norm.
pub const JACOBI_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Symmetric eigendecomposition, eigenvalues in non-increasing order.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: DenseMatrix,
    pub sweeps: usize,
}

fn off_diagonal_norm(a: &DenseMatrix) -> f64 {
    let n = a.rows;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a.get(i, j).powi(2);
            }
        }
    }
    s.sqrt()
}

pub fn jacobi_eigen(matrix: &DenseMatrix) -> Result<SymmetricEigen> {
    if matrix.rows != matrix.cols {
        return Err(Error::Shape(format!("{}x{} is not square", matrix.rows, matrix.cols)));
    }
    let n = matrix.rows;
    let mut a = matrix.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = matrix.squared_norm().sqrt().max(f64::MIN_POSITIVE);
    let mut sweeps = 0;
    while off_diagonal_norm(&a) > JACOBI_TOL * scale * 1e-2 && sweeps < MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    if off_diagonal_norm(&a) > JACOBI_TOL * scale {
        return Err(Error::Degenerate(format!("Jacobi did not converge in {MAX_SWEEPS} sweeps")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v.get(r, order[c]));
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    /// n × k' left singular vectors (k' ≤ k after dropping zero singular
    /// values).
    pub theta: DenseMatrix,
    /// Non-increasing.
    pub singular_values: Vec<f64>,
    /// Requested columns that were dropped for a zero singular value.
    pub dropped: usize,
}

/// Singular values below this fraction of the largest count as zero.
pub const ZERO_SINGULAR_REL: f64 = 1e-10;

pub fn truncated_svd(w: &DenseMatrix, k: usize) -> Result<TruncatedSvd> {
    if k > w.rows.min(w.cols) {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds min({}, {})",
            w.rows, w.cols
        )));
    }
    let eig = jacobi_eigen(&w.gram())?;
    let sigma_max = eig.values.first().copied().unwrap_or(0.0).max(0.0).sqrt();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut singular_values = Vec::with_capacity(k);
    for c in 0..k {
        let sigma = eig.values[c].max(0.0).sqrt();
        if sigma == 0.0 || sigma <= ZERO_SINGULAR_REL * sigma_max {
            continue;
        }
        // u = W v / σ
        let v = eig.vectors.column(c);
        let mut u: Vec<f64> = (0..w.rows)
            .map(|r| w.row(r).iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / sigma)
            .collect();
        // two passes of Gram-Schmidt against earlier columns
        for _ in 0..2 {
            for prev in &columns {
                let dot: f64 = prev.iter().zip(&u).map(|(a, b)| a * b).sum();
                for (x, p) in u.iter_mut().zip(prev) {
                    *x -= dot * p;
                }
            }
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            u.iter_mut().for_each(|x| *x /= norm);
        }
        // sign: the largest-magnitude entry is positive
        let pivot = u
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
        }
        columns.push(u);
        singular_values.push(sigma);
    }
    let dropped = k - columns.len();
    if dropped > 0 {
        log::warn!("truncated_svd: dropped {dropped} columns with zero singular value");
    }
    let kk = columns.len();
    let theta = DenseMatrix::from_fn(w.rows, kk, |r, c| columns[c][r]);
    Ok(TruncatedSvd {
        theta,
        singular_values,
        dropped,
    })
}
