//! Small dense linear algebra, generic over [`Scalar`] so the same elimination
//! inverts plain matrices and matrices of jets.

use crate::error::{Error, Result};
use crate::jets::Scalar;

pub type Matrix<T> = Vec<Vec<T>>;

/// Gauss-Jordan inverse with partial pivoting on the leading values.
pub fn invert<T: Scalar>(m: &Matrix<T>) -> Result<Matrix<T>> {
    let n = m.len();
    let mut a: Matrix<T> = m.to_vec();
    let mut inv: Matrix<T> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| m[0][0].lift(if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    let scale = m
        .iter()
        .flatten()
        .map(|v| v.value().abs())
        .fold(0.0, f64::max);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].value().abs().total_cmp(&a[j][col].value().abs()))
            .unwrap();
        if a[piv][col].value().abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Regularity("singular matrix".into()));
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] = a[col][j].try_div(&p)?;
            inv[col][j] = inv[col][j].try_div(&p)?;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col].clone();
            for j in 0..n {
                a[row][j] = a[row][j].sub(&f.mul(&a[col][j]));
                inv[row][j] = inv[row][j].sub(&f.mul(&inv[col][j]));
            }
        }
    }
    Ok(inv)
}

/// Lower-triangular Cholesky factor; fails unless `m` is positive definite.
pub fn cholesky(m: &Matrix<f64>) -> Result<Matrix<f64>> {
    let n = m.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::Regularity("matrix is not positive definite".into()));
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Solves the least-squares problem `min |A c - b|` through the normal equations.
pub fn least_squares(rows: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let k = rows.first().map_or(0, |r| r.len());
    let mut ata = vec![vec![0.0; k]; k];
    let mut atb = vec![0.0; k];
    for (r, &b) in rows.iter().zip(rhs) {
        for i in 0..k {
            atb[i] += r[i] * b;
            for j in 0..k {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    let inv = invert(&ata).map_err(|_| Error::Argument("degenerate least-squares system".into()))?;
    Ok((0..k)
        .map(|i| (0..k).map(|j| inv[i][j] * atb[j]).sum())
        .collect())
}

pub fn mat_vec(m: &Matrix<f64>, v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn quad_form(m: &Matrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    dot(u, &mat_vec(m, v))
}
