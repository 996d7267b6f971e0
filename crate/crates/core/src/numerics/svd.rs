//! Thin singular value decomposition by one-sided (Hestenes) Jacobi rotations.

use super::matrix::{axpy, dot, norm, Matrix};
use crate::error::{input, Error, Result};

pub const MAX_SWEEPS: usize = 100;
/// Sweeps stop once every column pair satisfies `|a_p·a_q| ≤ 1e-12 ‖a_p‖‖a_q‖`.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// `m = U diag(s) Vᵀ` with `U` (rows x k) and `V` (cols x k), `k = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Descending, non-negative.
    pub singular_values: Vec<f64>,
    pub left_vectors: Matrix,
    pub right_vectors: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let (m, n) = (self.left_vectors.rows(), self.right_vectors.rows());
        let mut out = Matrix::zeros(m, n);
        for (k, &s) in self.singular_values.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for i in 0..m {
                let u = self.left_vectors[(i, k)] * s;
                if u == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += u * self.right_vectors[(j, k)];
                }
            }
        }
        out
    }

    /// Number of singular values strictly above `rel_tol · σ_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values.iter().filter(|&&s| s > rel_tol * top && s > 0.0).count()
    }
}

pub fn svd(m: &Matrix) -> Result<SvdResult> {
    if !m.is_finite() {
        return Err(input("svd input must be finite"));
    }
    if m.rows() < m.cols() {
        let t = svd_tall(&m.transpose())?;
        return Ok(SvdResult {
            singular_values: t.singular_values,
            left_vectors: t.right_vectors,
            right_vectors: t.left_vectors,
        });
    }
    svd_tall(m)
}

fn svd_tall(m: &Matrix) -> Result<SvdResult> {
    let (rows, cols) = m.shape();
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; cols];
            e[j] = 1.0;
            e
        })
        .collect();

    // Columns at roundoff level relative to the whole matrix count as zero.
    let negligible = (f64::EPSILON * m.frobenius_norm()).powi(2) * rows as f64;
    let mut converged = cols < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut worst = 0.0_f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma == 0.0 || alpha <= negligible || beta <= negligible {
                    continue;
                }
                let ratio = gamma.abs() / (alpha * beta).sqrt();
                worst = worst.max(ratio);
                if ratio <= f64::EPSILON {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        converged = worst <= OFF_DIAGONAL_TOL;
    }
    if !converged {
        return Err(Error::Numeric(format!("svd did not converge within {MAX_SWEEPS} sweeps")));
    }

    let mut values: Vec<f64> = a.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| values[y].total_cmp(&values[x]));
    values = order.iter().map(|&k| values[k]).collect();

    let mut left: Vec<Option<Vec<f64>>> = order
        .iter()
        .zip(&values)
        .map(|(&k, &s)| (s * s > negligible && s > 0.0).then(|| a[k].iter().map(|x| x / s).collect()))
        .collect();
    complete_orthonormal(&mut left, rows);
    for (s, u) in values.iter_mut().zip(&left) {
        if u.is_none() {
            *s = 0.0;
        }
    }
    let left: Vec<Vec<f64>> = left.into_iter().map(|u| u.expect("completed")).collect();
    let right: Vec<&Vec<f64>> = order.iter().map(|&k| &v[k]).collect();
    Ok(SvdResult {
        singular_values: values,
        left_vectors: Matrix::from_columns(rows, &left)?,
        right_vectors: Matrix::from_columns(cols, &right)?,
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (xp, xq) = (&mut lo[p], &mut hi[0]);
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let (ap, aq) = (*a, *b);
        *a = c * ap - s * aq;
        *b = s * ap + c * aq;
    }
}

/// Fills missing columns with unit vectors orthogonal to the present ones.
fn complete_orthonormal(columns: &mut [Option<Vec<f64>>], dim: usize) {
    let mut basis: Vec<Vec<f64>> = columns.iter().flatten().cloned().collect();
    let mut candidate = 0;
    for slot in columns.iter_mut().filter(|c| c.is_none()) {
        while candidate < dim {
            let mut e = vec![0.0; dim];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for b in &basis {
                    let proj = dot(b, &e);
                    axpy(-proj, b, &mut e);
                }
            }
            let n = norm(&e);
            if n > 1e-8 {
                e.iter_mut().for_each(|x| *x /= n);
                basis.push(e.clone());
                *slot = Some(e);
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_orthonormal_columns(m: &Matrix) {
        let g = m.transpose().matmul(m).unwrap();
        let err = g.sub(&Matrix::identity(m.cols())).unwrap().frobenius_norm();
        assert!(err < 1e-8, "columns not orthonormal: {err}");
    }

    #[test]
    fn diagonal_values() {
        let r = svd(&Matrix::from_diag(&[1.0, 3.0])).unwrap();
        assert_eq!(r.singular_values.len(), 2);
        assert!((r.singular_values[0] - 3.0).abs() < 1e-14);
        assert!((r.singular_values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_has_orthonormal_factors() {
        let r = svd(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!(r.singular_values, vec![0.0, 0.0]);
        assert_orthonormal_columns(&r.left_vectors);
        assert_orthonormal_columns(&r.right_vectors);
    }

    #[test]
    fn rank_deficient_converges() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 3.0], [0.5, -1.0, 0.25], [1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]).unwrap();
        let r = svd(&m.transpose()).unwrap();
        assert_eq!(r.rank(1e-12), 2);
        assert_orthonormal_columns(&r.left_vectors);
        assert_orthonormal_columns(&r.right_vectors);
        assert!(r.reconstruct().sub(&m.transpose()).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn nilpotent_example() {
        // M Mᵀ = diag(4, 0)
        let m = Matrix::from_rows(&[[0.0, 2.0], [0.0, 0.0]]).unwrap();
        let r = svd(&m).unwrap();
        assert!((r.singular_values[0] - 2.0).abs() < 1e-14);
        assert!(r.singular_values[1].abs() < 1e-14);
        assert_orthonormal_columns(&r.left_vectors);
        assert_orthonormal_columns(&r.right_vectors);
        assert!(r.reconstruct().sub(&m).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn wide_matrix_goes_through_transpose() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let r = svd(&m).unwrap();
        assert_eq!(r.left_vectors.shape(), (2, 2));
        assert_eq!(r.right_vectors.shape(), (3, 2));
        assert!(r.reconstruct().sub(&m).unwrap().frobenius_norm() < 1e-12);
        assert_eq!(r.rank(1e-10), 2);
    }
}
