use super::matrix::Matrix;
use super::parallel::{map_chunks, max_threads};

/// Nonzero entries of a vector, indices ascending.
#[derive(Debug, Clone, Default)]
pub struct SparseRow {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseRow {
    pub fn from_dense(v: &[f64]) -> Self {
        let mut row = Self::default();
        for (i, &x) in v.iter().enumerate() {
            if x != 0.0 {
                row.idx.push(i);
                row.val.push(x);
            }
        }
        row
    }
}

/// `Σ_i r_i r_iᵀ` for vectors of length `m`, summed in input order.
///
/// Workers own bands of output rows, so every entry sees the same addition order for any
/// thread count.
pub fn sparse_gram(rows: &[SparseRow], m: usize) -> Matrix {
    let band = m.div_ceil(max_threads().max(1) * 4).max(16);
    let bands = map_chunks(m, band, |range| {
        let mut block = Matrix::zeros(range.len(), m);
        for row in rows {
            let lo = row.idx.partition_point(|&i| i < range.start);
            let hi = row.idx.partition_point(|&i| i < range.end);
            for p in lo..hi {
                let (i, vi) = (row.idx[p], row.val[p]);
                let out = block.row_mut(i - range.start);
                for (&j, &vj) in row.idx.iter().zip(&row.val) {
                    out[j] += vi * vj;
                }
            }
        }
        block
    });
    let mut data = Vec::with_capacity(m * m);
    for b in bands {
        data.extend(b.into_vec());
    }
    Matrix::from_vec(m, m, data).expect("finite gram")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_outer_products() {
        let vs = [vec![1.0, 0.0, 2.0], vec![0.0, -1.0, 3.0]];
        let rows: Vec<_> = vs.iter().map(|v| SparseRow::from_dense(v)).collect();
        let g = sparse_gram(&rows, 3);
        for i in 0..3 {
            for j in 0..3 {
                let want: f64 = vs.iter().map(|v| v[i] * v[j]).sum();
                assert_eq!(g[(i, j)], want);
            }
        }
    }
}
