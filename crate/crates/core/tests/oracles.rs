//! Numerics checked against nalgebra.

use mhla_core::certificate::{certify, second_moment};
use mhla_core::numerics::{solve_least_squares, svd, sym_eigen, Matrix, RngStream};
use mhla_core::tasks::gen_random_mhla;
use nalgebra::DMatrix;

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = b.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

#[test]
fn singular_values_match() {
    let mut rng = RngStream::new(1);
    for _ in 0..50 {
        let (r, c) = (rng.range_inclusive(1, 12), rng.range_inclusive(1, 12));
        let mut m = rng.normal_matrix(r, c, 1.0);
        if rng.bernoulli(0.3) && r > 1 {
            let first = m.row(0).to_vec();
            m.row_mut(r - 1).copy_from_slice(&first);
        }
        let ours = svd(&m).unwrap().singular_values;
        let mut theirs: Vec<f64> = to_na(&m).singular_values().iter().copied().collect();
        theirs.sort_by(|a, b| b.total_cmp(a));
        assert!(close(&ours, &theirs, 1e-10), "{ours:?} vs {theirs:?}");
    }
}

#[test]
fn symmetric_spectrum_matches() {
    let mut rng = RngStream::new(2);
    for _ in 0..50 {
        let n = rng.range_inclusive(1, 15);
        let k = rng.range_inclusive(1, n);
        let a = rng.normal_matrix(n, k, 1.0);
        let m = a.matmul(&a.transpose()).unwrap();
        let ours = sym_eigen(&m).unwrap().values;
        let mut theirs: Vec<f64> = to_na(&m).symmetric_eigenvalues().iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        assert!(close(&ours, &theirs, 1e-10), "{ours:?} vs {theirs:?}");
    }
}

#[test]
fn min_norm_least_squares_matches_pseudo_inverse() {
    let mut rng = RngStream::new(3);
    for _ in 0..30 {
        let (r, c) = (rng.range_inclusive(2, 20), rng.range_inclusive(1, 8));
        let rank = rng.range_inclusive(1, c.min(r));
        let m = rng.normal_matrix(r, rank, 1.0).matmul(&rng.normal_matrix(rank, c, 1.0)).unwrap();
        let y = rng.normal_vec(r, 1.0);
        let ours = solve_least_squares(&m, &y, 0.0).unwrap();
        let pinv = to_na(&m).pseudo_inverse(1e-10).unwrap();
        let theirs = pinv * nalgebra::DVector::from_column_slice(&y);
        assert!(close(&ours, theirs.as_slice(), 1e-7), "{ours:?} vs {theirs:?}");
    }
}

#[test]
fn certificate_extremes_match_dense_spectrum() {
    for (d, seed) in [(2, 4), (3, 5)] {
        let (data, _) = gen_random_mhla(d, 6, 400, 1, seed).unwrap();
        let report = certify(&data, None).unwrap();
        let eig = to_na(&second_moment(&data, None)).symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        assert!((report.lambda_max - hi).abs() <= 1e-10 * hi);
        assert!((report.lambda_min - lo).abs() <= 1e-10 * hi, "{} vs {lo}", report.lambda_min);
    }
}
