use crate::dataset::{Dataset, SequenceSample};
use crate::error::{input, Result};
use crate::model::{Head, MhlaParams};
use crate::numerics::{axpy, dot, Matrix, RngStream};

/// Key-value memory with a query among the keys.
#[derive(Debug, Clone, PartialEq)]
pub struct AssocInstance {
    /// Column `j` is `k_j`.
    pub keys: Matrix,
    /// Column `j` is `v_j`.
    pub values: Matrix,
    pub query_index: usize,
    pub noise: Vec<f64>,
}

impl AssocInstance {
    pub fn d(&self) -> usize {
        self.keys.rows()
    }

    pub fn query(&self) -> Vec<f64> {
        self.keys.column(self.query_index)
    }

    /// `[k_1 … k_d q; v_1 … v_d ζ]`, shape `2d × (d+1)`.
    pub fn z(&self) -> Matrix {
        let d = self.d();
        let mut z = Matrix::zeros(2 * d, d + 1);
        let q = self.query();
        for i in 0..d {
            for j in 0..d {
                z[(i, j)] = self.keys[(i, j)];
                z[(d + i, j)] = self.values[(i, j)];
            }
            z[(i, d)] = q[i];
            z[(d + i, d)] = self.noise[i];
        }
        z
    }

    /// `[0; Σ_j ⟨q, k_j⟩ v_j]`.
    pub fn lookup_target(&self) -> Vec<f64> {
        let d = self.d();
        let q = self.query();
        let mut out = vec![0.0; 2 * d];
        for j in 0..d {
            let w = dot(&q, &self.keys.column(j));
            axpy(w, &self.values.column(j), &mut out[d..]);
        }
        out
    }
}

/// Single head on `2d` dimensions: `V = [0 0; 0 I]`, `Q = [I 0; 0 0]`.
pub fn assoc_ground_truth(d: usize) -> Result<MhlaParams> {
    if d == 0 {
        return Err(input("d must be positive"));
    }
    let mut v = Matrix::zeros(2 * d, 2 * d);
    let mut q = Matrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        v[(d + i, d + i)] = 1.0;
        q[(i, i)] = 1.0;
    }
    MhlaParams::new(2 * d, vec![Head { v, q }])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssocKind {
    /// Keys and values i.i.d. standard normal.
    Gaussian,
    /// Keys and values are the columns of independent random orthogonal matrices.
    Unitary,
}

pub fn sample_assoc(d: usize, kind: AssocKind, zero_noise: bool, rng: &mut RngStream) -> AssocInstance {
    let (keys, values) = match kind {
        AssocKind::Gaussian => (rng.normal_matrix(d, d, 1.0), rng.normal_matrix(d, d, 1.0)),
        AssocKind::Unitary => (rng.random_orthogonal(d), rng.random_orthogonal(d)),
    };
    let query_index = rng.below(d);
    let noise = if zero_noise { vec![0.0; d] } else { rng.normal_vec(d, 1.0) };
    AssocInstance { keys, values, query_index, noise }
}

/// Associative-memory samples; each is unitary with probability `unitary_fraction`.
///
/// Targets are the ground-truth outputs, which add `‖q‖² ζ` to the lookup when the noise
/// column is nonzero.
pub fn gen_assoc(d: usize, samples: usize, unitary_fraction: f64, seed: u64, zero_noise: bool) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&unitary_fraction) {
        return Err(input(format!("unitary fraction must lie in [0, 1], got {unitary_fraction}")));
    }
    if samples == 0 {
        return Err(input("sample count must be positive"));
    }
    let truth = assoc_ground_truth(d)?;
    let mut rng = RngStream::new(seed);
    let out = (0..samples)
        .map(|_| {
            let kind = if rng.uniform() < unitary_fraction { AssocKind::Unitary } else { AssocKind::Gaussian };
            let inst = sample_assoc(d, kind, zero_noise, &mut rng);
            let z = inst.z();
            let y = truth.forward_last(&z)?;
            SequenceSample::new(z, y)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_lookup() {
        let inst = AssocInstance {
            keys: Matrix::from_rows(&[[1.0]]).unwrap(),
            values: Matrix::from_rows(&[[3.0]]).unwrap(),
            query_index: 0,
            noise: vec![0.0],
        };
        let y = assoc_ground_truth(1).unwrap().forward_last(&inst.z()).unwrap();
        assert_eq!(y, vec![0.0, 3.0]);
        assert_eq!(inst.lookup_target(), y);
    }

    #[test]
    fn orthonormal_keys_return_matching_value() {
        let mut rng = RngStream::new(4);
        let inst = sample_assoc(4, AssocKind::Unitary, true, &mut rng);
        let y = assoc_ground_truth(4).unwrap().forward_last(&inst.z()).unwrap();
        let v = inst.values.column(inst.query_index);
        for i in 0..4 {
            assert!(y[i].abs() < 1e-12);
            assert!((y[4 + i] - v[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_adds_query_norm_term() {
        let mut rng = RngStream::new(5);
        let inst = sample_assoc(3, AssocKind::Gaussian, false, &mut rng);
        let y = assoc_ground_truth(3).unwrap().forward_last(&inst.z()).unwrap();
        let base = inst.lookup_target();
        let qq = dot(&inst.query(), &inst.query());
        for i in 0..3 {
            assert!((y[3 + i] - base[3 + i] - qq * inst.noise[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_fraction() {
        assert!(gen_assoc(2, 5, 1.5, 0, false).is_err());
    }
}
