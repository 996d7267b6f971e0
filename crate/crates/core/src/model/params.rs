use serde::{Deserialize, Serialize};

use crate::error::{contract, input, Result};
use crate::numerics::{svd, Matrix};

/// Default relative cutoff for keeping singular directions when folding a regressor.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// One attention head: value matrix `v` and key-query matrix `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub v: Matrix,
    pub q: Matrix,
}

/// Multi-head linear attention parameters over `d`-dimensional tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct MhlaParams {
    d: usize,
    heads: Vec<Head>,
}

#[derive(Deserialize)]
struct RawParams {
    d: usize,
    heads: Vec<Head>,
}

impl TryFrom<RawParams> for MhlaParams {
    type Error = crate::Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        MhlaParams::new(raw.d, raw.heads)
    }
}

impl MhlaParams {
    pub fn new(d: usize, heads: Vec<Head>) -> Result<Self> {
        if d == 0 {
            return Err(contract("dimension must be positive"));
        }
        if heads.is_empty() {
            return Err(contract("at least one head is required"));
        }
        for (h, head) in heads.iter().enumerate() {
            if head.v.shape() != (d, d) || head.q.shape() != (d, d) {
                return Err(contract(format!(
                    "head {h} has V {:?} and Q {:?}, expected {d}x{d}",
                    head.v.shape(),
                    head.q.shape()
                )));
            }
            if !head.v.is_finite() || !head.q.is_finite() {
                return Err(input(format!("head {h} has non-finite entries")));
            }
        }
        Ok(Self { d, heads })
    }

    pub fn single(v: Matrix, q: Matrix) -> Result<Self> {
        Self::new(v.rows(), vec![Head { v, q }])
    }

    /// A single all-zero head.
    pub fn zero(d: usize) -> Self {
        Self { d, heads: vec![Head { v: Matrix::zeros(d, d), q: Matrix::zeros(d, d) }] }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn heads(&self) -> &[Head] {
        &self.heads
    }

    pub fn head_count(&self) -> usize {
        self.heads.len()
    }

    /// Heads of `self` followed by heads of `other`.
    pub fn concat(&self, other: &MhlaParams) -> Result<Self> {
        if self.d != other.d {
            return Err(contract(format!("cannot concatenate d={} with d={}", self.d, other.d)));
        }
        let mut heads = self.heads.clone();
        heads.extend(other.heads.iter().cloned());
        Ok(Self { d: self.d, heads })
    }

    fn check_input(&self, z: &Matrix) -> Result<()> {
        if z.rows() != self.d {
            return Err(contract(format!("input has {} rows, params have d={}", z.rows(), self.d)));
        }
        if z.cols() == 0 {
            return Err(contract("input must have at least one column"));
        }
        Ok(())
    }

    /// `Σ_h V_h Z (Zᵀ Q_h z_n)` for the last column `z_n`.
    pub fn forward_last(&self, z: &Matrix) -> Result<Vec<f64>> {
        self.check_input(z)?;
        Ok(self.forward_query(z, &z.last_column()))
    }

    fn forward_query(&self, z: &Matrix, query: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for head in &self.heads {
            let q = head.q.matvec(query).expect("square head");
            let scores = z.tr_matvec(&q).expect("rows match d");
            let ctx = z.matvec(&scores).expect("cols match scores");
            for (o, x) in out.iter_mut().zip(head.v.matvec(&ctx).expect("square head")) {
                *o += x;
            }
        }
        out
    }

    /// `Σ_h V_h Z (Zᵀ Q_h Z)`: column `j` uses `z_j` as the query against the full context.
    pub fn forward_all(&self, z: &Matrix) -> Result<Matrix> {
        self.check_input(z)?;
        let columns: Vec<Vec<f64>> = (0..z.cols()).map(|j| self.forward_query(z, &z.column(j))).collect();
        Matrix::from_columns(self.d, &columns)
    }

    /// `T = Σ_h vec(V_h) vec(Q_h)ᵀ` with row-major `vec`.
    pub fn flatten(&self) -> Matrix {
        let dd = self.d * self.d;
        let mut t = Matrix::zeros(dd, dd);
        for head in &self.heads {
            let (v, q) = (head.v.as_slice(), head.q.as_slice());
            for (r, &vr) in v.iter().enumerate() {
                if vr == 0.0 {
                    continue;
                }
                for (o, &qc) in t.row_mut(r).iter_mut().zip(q) {
                    *o += vr * qc;
                }
            }
        }
        t
    }

    /// Factors a `d²×d²` regressor into heads through its SVD.
    ///
    /// Singular directions with `σ ≤ rank_tol·σ_max` are dropped. A zero regressor gives a
    /// single zero head.
    pub fn fold_regressor(w: &Matrix, rank_tol: f64) -> Result<Self> {
        let d = (w.rows() as f64).sqrt().round() as usize;
        if d == 0 || d * d != w.rows() || !w.is_square() {
            return Err(contract(format!("regressor must be d²xd², got {}x{}", w.rows(), w.cols())));
        }
        if !(rank_tol >= 0.0) {
            return Err(contract("rank_tol must be non-negative"));
        }
        // Zero rows and columns contribute nothing; factor only the active block.
        let live_rows: Vec<usize> = (0..w.rows()).filter(|&i| w.row(i).iter().any(|&x| x != 0.0)).collect();
        let live_cols: Vec<usize> =
            (0..w.cols()).filter(|&j| live_rows.iter().any(|&i| w[(i, j)] != 0.0)).collect();
        if live_rows.is_empty() {
            return Ok(Self::zero(d));
        }
        let mut block = Matrix::zeros(live_rows.len(), live_cols.len());
        for (bi, &i) in live_rows.iter().enumerate() {
            for (bj, &j) in live_cols.iter().enumerate() {
                block[(bi, bj)] = w[(i, j)];
            }
        }
        let dec = svd(&block)?;
        let top = dec.singular_values[0];
        let mut heads = Vec::new();
        for (k, &s) in dec.singular_values.iter().enumerate() {
            if !(s > rank_tol * top) || s == 0.0 {
                continue;
            }
            let root = s.sqrt();
            let mut v = vec![0.0; d * d];
            let mut q = vec![0.0; d * d];
            for (bi, &i) in live_rows.iter().enumerate() {
                v[i] = root * dec.left_vectors[(bi, k)];
            }
            for (bj, &j) in live_cols.iter().enumerate() {
                q[j] = root * dec.right_vectors[(bj, k)];
            }
            heads.push(Head { v: Matrix::from_vec(d, d, v)?, q: Matrix::from_vec(d, d, q)? });
        }
        if heads.is_empty() {
            return Ok(Self::zero(d));
        }
        Self::new(d, heads)
    }

    /// Rescales head `h` to `(c·V_h, Q_h/c)`.
    pub fn rebalanced(&self, h: usize, c: f64) -> Result<Self> {
        if c == 0.0 || !c.is_finite() {
            return Err(contract("rebalancing factor must be finite and nonzero"));
        }
        let mut out = self.clone();
        let head = out.heads.get_mut(h).ok_or_else(|| contract(format!("no head {h}")))?;
        head.v = head.v.scaled(c);
        head.q = head.q.scaled(1.0 / c);
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::io::to_json_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn scalar_forward() {
        let p = MhlaParams::single(m(&[&[2.0]]), m(&[&[3.0]])).unwrap();
        assert_eq!(p.forward_last(&m(&[&[1.0]])).unwrap(), vec![6.0]);
        assert_eq!(p.forward_all(&m(&[&[1.0]])).unwrap(), m(&[&[6.0]]));
        assert_eq!(p.flatten(), m(&[&[6.0]]));
    }

    #[test]
    fn identity_heads_on_basis_context() {
        let p = MhlaParams::single(Matrix::identity(2), Matrix::identity(2)).unwrap();
        assert_eq!(p.forward_last(&Matrix::identity(2)).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let mut rng = RngStream::new(1);
        let p = MhlaParams::single(rng.normal_matrix(3, 3, 1.0), rng.normal_matrix(3, 3, 1.0)).unwrap();
        assert_eq!(p.forward_last(&Matrix::zeros(3, 4)).unwrap(), vec![0.0; 3]);
        assert_eq!(p.forward_all(&Matrix::zeros(3, 4)).unwrap(), Matrix::zeros(3, 4));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(MhlaParams::new(2, vec![]).is_err());
        assert!(MhlaParams::single(Matrix::zeros(2, 2), Matrix::zeros(3, 3)).is_err());
        let p = MhlaParams::zero(2);
        assert!(p.forward_last(&Matrix::zeros(3, 1)).is_err());
        assert!(p.forward_last(&Matrix::zeros(2, 0)).is_err());
    }

    #[test]
    fn zero_regressor_folds_to_zero_head() {
        let p = MhlaParams::fold_regressor(&Matrix::zeros(4, 4), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(p, MhlaParams::zero(2));
        assert!(MhlaParams::fold_regressor(&Matrix::zeros(3, 3), DEFAULT_RANK_TOL).is_err());
    }

    #[test]
    fn generic_regressor_folds_to_full_rank() {
        let w = RngStream::new(5).normal_matrix(4, 4, 1.0);
        let p = MhlaParams::fold_regressor(&w, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(p.head_count(), 4);
        assert!(p.flatten().sub(&w).unwrap().frobenius_norm() < 1e-10 * w.frobenius_norm());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = RngStream::new(2);
        let p = MhlaParams::single(rng.normal_matrix(2, 2, 1.0), rng.normal_matrix(2, 2, 1.0)).unwrap();
        let back = MhlaParams::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
        assert!(MhlaParams::from_json(r#"{"d":2,"heads":[]}"#).is_err());
    }
}
