//! Dense linear algebra and seeded randomness.

mod eigen;
mod gram;
mod lstsq;
mod matrix;
pub mod parallel;
mod rng;
mod svd;

pub use eigen::{sym_eig_min, sym_eigen, sym_spectrum_desc, SymEigen};
pub use gram::{sparse_gram, SparseRow};
pub use lstsq::{default_ridge, solve_least_squares, solve_normal_equations, Ridge, DEFAULT_RIDGE_SCALE};
pub use matrix::{axpy, dot, norm, Matrix};
pub use rng::RngStream;
pub use svd::{svd, SvdResult, MAX_SWEEPS, OFF_DIAGONAL_TOL};
