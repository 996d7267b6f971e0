//! Ridge-regularized least squares through the normal equations.

use super::eigen::sym_eigen;
use super::matrix::{axpy, Matrix};
use crate::error::{contract, input, Result};

/// Relative ridge used when the caller does not pick one: `1e-10 · trace(G) / cols`.
pub const DEFAULT_RIDGE_SCALE: f64 = 1e-10;

/// Relative eigenvalue cutoff for the pseudo-inverse fallback when no ridge is applied.
const PINV_RCOND: f64 = 1e-12;

/// Ridge strength selection.
#[derive(Debug, Default, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ridge {
    #[default]
    /// `DEFAULT_RIDGE_SCALE · trace(G) / reference_cols`.
    Auto,
    Fixed(f64),
}

impl Ridge {
    pub fn resolve(self, gram_trace: f64, reference_cols: usize) -> f64 {
        match self {
            Ridge::Auto if reference_cols == 0 => 0.0,
            Ridge::Auto => DEFAULT_RIDGE_SCALE * gram_trace / reference_cols as f64,
            Ridge::Fixed(r) => r,
        }
    }
}

/// Default ridge for a design matrix: `1e-10 · trace(designᵀ design) / cols`.
pub fn default_ridge(design: &Matrix) -> f64 {
    let trace: f64 = design.as_slice().iter().map(|v| v * v).sum();
    Ridge::Auto.resolve(trace, design.cols())
}

/// Returns `argmin ‖design·w − targets‖² + ridge‖w‖²`.
///
/// With `ridge == 0` and a rank-deficient design the minimum-norm minimizer is returned.
pub fn solve_least_squares(design: &Matrix, targets: &[f64], ridge: f64) -> Result<Vec<f64>> {
    if design.rows() != targets.len() {
        return Err(contract(format!(
            "design has {} rows but {} targets were given",
            design.rows(),
            targets.len()
        )));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(contract(format!("ridge must be a finite non-negative number, got {ridge}")));
    }
    if !design.is_finite() || targets.iter().any(|t| !t.is_finite()) {
        return Err(input("least-squares inputs must be finite"));
    }
    let gram = design.transpose().matmul(design)?;
    let rhs = design.tr_matvec(targets)?;
    let mut sol = solve_normal_equations(&gram, &[rhs], ridge)?;
    Ok(sol.pop().expect("one right-hand side"))
}

/// Solves `(gram + ridge·I) w = b` for every right-hand side `b`.
///
/// `gram` must be symmetric positive semidefinite. Cholesky is tried first; if a pivot collapses
/// the system is treated as singular and solved by an eigendecomposition pseudo-inverse, which
/// selects the minimum-norm solution.
pub fn solve_normal_equations(gram: &Matrix, rhs: &[Vec<f64>], ridge: f64) -> Result<Vec<Vec<f64>>> {
    let n = gram.rows();
    if !gram.is_square() {
        return Err(contract("normal equations need a square Gram matrix"));
    }
    if let Some(b) = rhs.iter().find(|b| b.len() != n) {
        return Err(contract(format!("right-hand side has length {}, expected {n}", b.len())));
    }
    if n == 0 {
        return Ok(rhs.iter().map(|_| Vec::new()).collect());
    }
    match cholesky(gram, ridge) {
        Some(l) => Ok(rhs.iter().map(|b| cholesky_solve(&l, b)).collect()),
        None => pseudo_inverse_solve(gram, rhs, ridge),
    }
}

/// Lower-triangular factor of `gram + ridge·I`, or `None` when a pivot is numerically zero.
fn cholesky(gram: &Matrix, ridge: f64) -> Option<Matrix> {
    let n = gram.rows();
    let mut l = Matrix::zeros(n, n);
    let tol = 64.0 * f64::EPSILON;
    for j in 0..n {
        let diag = gram[(j, j)] + ridge;
        let s: f64 = l.row(j)[..j].iter().map(|v| v * v).sum();
        let pivot = diag - s;
        if !(pivot > tol * diag.abs()) || pivot <= 0.0 {
            return None;
        }
        let pivot = pivot.sqrt();
        l[(j, j)] = pivot;
        for i in j + 1..n {
            let s: f64 = l.row(i)[..j].iter().zip(&l.row(j)[..j]).map(|(a, b)| a * b).sum();
            l[(i, j)] = (gram[(i, j)] - s) / pivot;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        let s: f64 = l.row(i)[..i].iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
        y[i] = (y[i] - s) / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = 0.0;
        for k in i + 1..n {
            s += l[(k, i)] * y[k];
        }
        y[i] = (y[i] - s) / l[(i, i)];
    }
    y
}

fn pseudo_inverse_solve(gram: &Matrix, rhs: &[Vec<f64>], ridge: f64) -> Result<Vec<Vec<f64>>> {
    let eig = sym_eigen(gram)?;
    let n = gram.rows();
    let top = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cutoff = if ridge > 0.0 { 0.0 } else { PINV_RCOND * top };
    Ok(rhs
        .iter()
        .map(|b| {
            let mut w = vec![0.0; n];
            for (k, &lambda) in eig.values.iter().enumerate() {
                let denom = lambda.max(0.0) + ridge;
                if denom <= cutoff || denom == 0.0 {
                    continue;
                }
                let v = eig.vectors.column(k);
                let coeff = v.iter().zip(b).map(|(a, c)| a * c).sum::<f64>() / denom;
                axpy(coeff, &v, &mut w);
            }
            w
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objective(design: &Matrix, targets: &[f64], w: &[f64], ridge: f64) -> f64 {
        let pred = design.matvec(w).unwrap();
        let resid: f64 = pred.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum();
        resid + ridge * w.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn exact_one_dimensional_fit() {
        let design = Matrix::from_rows(&[[1.0], [0.0]]).unwrap();
        let w = solve_least_squares(&design, &[3.0, 0.0], 0.0).unwrap();
        assert!((w[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn identity_design_returns_targets() {
        let w = solve_least_squares(&Matrix::identity(2), &[2.0, 5.0], 0.0).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12 && (w[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn averages_conflicting_targets() {
        // (w-1)^2 + (w-3)^2 is minimized at w = 2.
        let design = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let w = solve_least_squares(&design, &[1.0, 3.0], 0.0).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_without_ridge_is_minimum_norm() {
        // Two identical columns: any w0 + w1 = 2 fits; the minimum-norm split is (1, 1).
        let design = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0]]).unwrap();
        let w = solve_least_squares(&design, &[2.0, 4.0], 0.0).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-10 && (w[1] - 1.0).abs() < 1e-10, "{w:?}");
    }

    #[test]
    fn errors_on_bad_inputs() {
        let design = Matrix::identity(2);
        assert!(matches!(
            solve_least_squares(&design, &[1.0], 0.0),
            Err(crate::Error::Contract(_))
        ));
        assert!(matches!(
            solve_least_squares(&design, &[1.0, f64::INFINITY], 0.0),
            Err(crate::Error::Input(_))
        ));
        assert!(solve_least_squares(&design, &[1.0, 1.0], -1.0).is_err());
    }

    #[test]
    fn ridge_shrinks_towards_zero() {
        // design = [1], target 2, ridge 1: minimize (w-2)^2 + w^2 -> w = 1.
        let design = Matrix::from_rows(&[[1.0]]).unwrap();
        let w = solve_least_squares(&design, &[2.0], 1.0).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12);
        let obj = objective(&design, &[2.0], &w, 1.0);
        assert!((obj - 2.0).abs() < 1e-12);
    }
}
