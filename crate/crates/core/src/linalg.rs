//! Small dense kernels: Householder least squares and Cholesky solves.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Relative pivot tolerance used by the QR rank check.
pub const PIVOT_TOL: f64 = 1e-10;

/// Least-squares solve of `a x ≈ b` by Householder QR.
///
/// A column whose diagonal pivot falls below `PIVOT_TOL` times the largest
/// column norm is reported as `RankDeficient`.
pub fn lstsq_qr(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    let (n, d) = a.dim();
    if b.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: b.len() });
    }
    if d > n {
        return Err(Error::RankDeficient { pivot: n });
    }
    if d == 0 {
        return Ok(Array1::zeros(0));
    }
    // Column-major working copy: cols[j] is column j.
    let mut cols: Vec<Vec<f64>> = (0..d).map(|j| a.column(j).to_vec()).collect();
    let mut rhs = b.to_vec();
    let scale = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut diag = vec![0.0; d];

    for k in 0..d {
        let norm = cols[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= PIVOT_TOL * scale {
            return Err(Error::RankDeficient { pivot: k });
        }
        let alpha = if cols[k][k] > 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in place of column k below the diagonal.
        let mut v: Vec<f64> = cols[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        diag[k] = alpha;
        if vnorm2 > 0.0 {
            for col in cols.iter_mut().skip(k + 1) {
                let dot: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
                let f = 2.0 * dot / vnorm2;
                for (c, vi) in col[k..].iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            }
            let dot: f64 = v.iter().zip(&rhs[k..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (r, vi) in rhs[k..].iter_mut().zip(&v) {
                *r -= f * vi;
            }
        }
    }

    // Back substitution on R x = (Q^T b)[..d].
    let mut x = vec![0.0; d];
    for k in (0..d).rev() {
        let mut s = rhs[k];
        for j in k + 1..d {
            s -= cols[j][k] * x[j];
        }
        x[k] = s / diag[k];
    }
    Ok(Array1::from(x))
}

/// Solves `a x = b` for symmetric positive definite `a` via Cholesky.
/// Returns `None` when a non-positive pivot is met.
pub fn cholesky_solve(mut a: Array2<f64>, b: ArrayView1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    let max_diag = a.diag().iter().cloned().fold(0.0_f64, f64::max);
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= a[[j, k]] * a[[j, k]];
        }
        if !(d > PIVOT_TOL * max_diag.max(f64::MIN_POSITIVE)) {
            return None;
        }
        let d = d.sqrt();
        a[[j, j]] = d;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = s / d;
        }
    }
    let mut z = b.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= a[[i, k]] * z[k];
        }
        z[i] = s / a[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= a[[k, i]] * z[k];
        }
        z[i] = s / a[[i, i]];
    }
    Some(Array1::from(z))
}

/// Copies the listed columns of `m` into a new matrix, in the listed order.
pub fn select_columns(m: ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    m.select(Axis(1), idx)
}

/// Euclidean norm.
pub fn norm2(v: ArrayView1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest absolute entry; zero for an empty vector.
pub fn max_abs(v: ArrayView1<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn qr_solves_square_system() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let b = array![3.0, 5.0];
        let x = lstsq_qr(a.view(), b.view()).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12);
        assert!((x[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn qr_flags_collinear_columns() {
        let a = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let b = array![1.0, 1.0, 1.0];
        assert!(matches!(
            lstsq_qr(a.view(), b.view()),
            Err(Error::RankDeficient { pivot: 1 })
        ));
    }

    #[test]
    fn cholesky_matches_known_solution() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let b = array![2.0, 1.0];
        let x = cholesky_solve(a, b.view()).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12);
        assert!(x[1].abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky_solve(a, array![1.0, 1.0].view()).is_none());
    }
}
