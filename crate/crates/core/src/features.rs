//! Cubic feature maps that make linear attention linear in its parameters.
//!
//! Symmetric feature layout (length `ψ = C(d,2)·d + d²`):
//! - pair block: index `pair_rank(j,k)·d + ℓ` for `j < k` in lexicographic order, value `⟨z_j, z_k⟩ z_{ℓ,n}`;
//! - square block: index `C(d,2)·d + j·d + ℓ`, value `‖z_j‖² z_{ℓ,n}`.
//!
//! Here `z_j` is row `j` of the context and `z_{ℓ,n}` is entry `ℓ` of its last column.

use crate::error::{contract, Result};
use crate::model::MhlaParams;
use crate::numerics::Matrix;

pub fn pair_count(d: usize) -> usize {
    d * d.saturating_sub(1) / 2
}

pub fn psi(d: usize) -> usize {
    pair_count(d) * d + d * d
}

/// Lexicographic rank of the pair `j < k` among all pairs of `0..d`.
pub fn pair_rank(j: usize, k: usize, d: usize) -> usize {
    debug_assert!(j < k && k < d);
    j * d - j * (j + 1) / 2 + (k - j - 1)
}

/// Position of the entry for rows `{j, k}` and last-column coordinate `ℓ`; `j == k` addresses
/// the square block.
pub fn sym_index(j: usize, k: usize, l: usize, d: usize) -> usize {
    let (j, k) = if j <= k { (j, k) } else { (k, j) };
    if j == k {
        pair_count(d) * d + j * d + l
    } else {
        pair_rank(j, k, d) * d + l
    }
}

/// `(j, k, ℓ)` labels for every symmetric feature, in layout order. Squares have `j == k`.
pub fn sym_layout(d: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::with_capacity(psi(d));
    for j in 0..d {
        for k in j + 1..d {
            out.extend((0..d).map(|l| (j, k, l)));
        }
    }
    for j in 0..d {
        out.extend((0..d).map(|l| (j, j, l)));
    }
    out
}

/// `𝒳(Z)[j, k·d + ℓ] = ⟨z_j, z_k⟩ z_{ℓ,n}`.
pub fn learn_features(z: &Matrix) -> Matrix {
    let d = z.rows();
    let g = z.row_gram();
    let last = z.last_column();
    let mut x = Matrix::zeros(d, d * d);
    for j in 0..d {
        let row = x.row_mut(j);
        for k in 0..d {
            for l in 0..d {
                row[k * d + l] = g[(j, k)] * last[l];
            }
        }
    }
    x
}

/// The `d⁴`-vector with `𝒳(Z)` in row block `a` and zeros elsewhere, matching `flatten()` entries.
pub fn stacked_learn_row(z: &Matrix, a: usize) -> Vec<f64> {
    let d = z.rows();
    let dd = d * d;
    let x = learn_features(z);
    let mut out = vec![0.0; dd * dd];
    for j in 0..d {
        out[(a * d + j) * dd..(a * d + j + 1) * dd].copy_from_slice(x.row(j));
    }
    out
}

pub fn sym_features(z: &Matrix) -> Vec<f64> {
    sym_features_impl(z, None)
}

/// Centered variant: pair entries and `(‖z_j‖² − n·m2)` square entries, all divided by `√n`.
pub fn sym_features_centered(z: &Matrix, m2: f64) -> Vec<f64> {
    sym_features_impl(z, Some(m2))
}

fn sym_features_impl(z: &Matrix, centered: Option<f64>) -> Vec<f64> {
    let d = z.rows();
    let n = z.cols() as f64;
    let g = z.row_gram();
    let last = z.last_column();
    let scale = if centered.is_some() { 1.0 / n.sqrt() } else { 1.0 };
    let mut h = Vec::with_capacity(psi(d));
    for j in 0..d {
        for k in j + 1..d {
            h.extend(last.iter().map(|&x| scale * g[(j, k)] * x));
        }
    }
    for j in 0..d {
        let sq = g[(j, j)] - centered.map_or(0.0, |m2| n * m2);
        h.extend(last.iter().map(|&x| scale * sq * x));
    }
    h
}

/// `p(Θ)`: row `a` satisfies `forward_last(Θ, Z)[a] = ⟨p_a, ℋ(Z)⟩`.
pub fn param_feature(params: &MhlaParams) -> Matrix {
    regressor_param_feature(&params.flatten()).expect("flatten is d²xd²")
}

/// `p` of a regressor: pair entries `W[(a,j),(k,ℓ)] + W[(a,k),(j,ℓ)]`, squares `W[(a,j),(j,ℓ)]`.
pub fn regressor_param_feature(w: &Matrix) -> Result<Matrix> {
    let d = regressor_dim(w)?;
    let mut p = Matrix::zeros(d, psi(d));
    for a in 0..d {
        let row = p.row_mut(a);
        for (idx, (j, k, l)) in sym_layout(d).into_iter().enumerate() {
            row[idx] = if j == k {
                w[(a * d + j, j * d + l)]
            } else {
                w[(a * d + j, k * d + l)] + w[(a * d + k, j * d + l)]
            };
        }
    }
    Ok(p)
}

/// Minimum-norm regressor with the given `p`: pair coefficients are split evenly.
pub fn regressor_from_param_feature(p: &Matrix) -> Result<Matrix> {
    let d = p.rows();
    if d == 0 || p.cols() != psi(d) {
        return Err(contract(format!("parameter feature must be d x ψ(d), got {}x{}", p.rows(), p.cols())));
    }
    let dd = d * d;
    let mut w = Matrix::zeros(dd, dd);
    for a in 0..d {
        for (idx, (j, k, l)) in sym_layout(d).into_iter().enumerate() {
            let c = p[(a, idx)];
            if j == k {
                w[(a * d + j, j * d + l)] = c;
            } else {
                w[(a * d + j, k * d + l)] = 0.5 * c;
                w[(a * d + k, j * d + l)] = 0.5 * c;
            }
        }
    }
    Ok(w)
}

fn regressor_dim(w: &Matrix) -> Result<usize> {
    let d = (w.rows() as f64).sqrt().round() as usize;
    if d == 0 || d * d != w.rows() || !w.is_square() {
        return Err(contract(format!("regressor must be d²xd², got {}x{}", w.rows(), w.cols())));
    }
    Ok(d)
}

/// `‖p(a) − p(b)‖_F`.
pub fn param_distance(a: &MhlaParams, b: &MhlaParams) -> Result<f64> {
    if a.d() != b.d() {
        return Err(contract(format!("cannot compare d={} with d={}", a.d(), b.d())));
    }
    Ok(param_feature(a).sub(&param_feature(b))?.frobenius_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dot, RngStream};

    #[test]
    fn scalar_examples() {
        let z = Matrix::from_rows(&[[2.0]]).unwrap();
        assert_eq!(learn_features(&z).as_slice(), &[8.0]);
        assert_eq!(sym_features(&z), vec![8.0]);
        let z = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        assert_eq!(learn_features(&z).as_slice(), &[2.0]);
        assert_eq!(sym_features(&Matrix::zeros(3, 2)), vec![0.0; psi(3)]);
    }

    #[test]
    fn psi_values() {
        assert_eq!(psi(1), 1);
        assert_eq!(psi(2), 6);
        assert_eq!(psi(4), 40);
        assert_eq!(psi(8), 288);
        assert_eq!(sym_layout(5).len(), psi(5));
    }

    #[test]
    fn sym_index_matches_layout() {
        let d = 4;
        for (idx, (j, k, l)) in sym_layout(d).into_iter().enumerate() {
            assert_eq!(sym_index(j, k, l, d), idx);
            assert_eq!(sym_index(k, j, l, d), idx);
        }
    }

    #[test]
    fn regressor_round_trip_preserves_p() {
        let mut rng = RngStream::new(9);
        let w = rng.normal_matrix(9, 9, 1.0);
        let p = regressor_param_feature(&w).unwrap();
        let w2 = regressor_from_param_feature(&p).unwrap();
        let p2 = regressor_param_feature(&w2).unwrap();
        assert!(p.sub(&p2).unwrap().frobenius_norm() < 1e-14);
        assert!(w2.frobenius_norm() <= w.frobenius_norm());
    }

    #[test]
    fn centered_features_shift_squares_only() {
        let z = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0]]).unwrap();
        let raw = sym_features(&z);
        let cen = sym_features_centered(&z, 0.5);
        let s = 2f64.sqrt();
        assert!((cen[0] - raw[0] / s).abs() < 1e-15);
        // square of row 0: (5 - 2·0.5)·z_{0,n}/√2
        assert!((cen[2] - 4.0 * 2.0 / s).abs() < 1e-14);
        assert!(dot(&cen, &cen).is_finite());
    }
}
