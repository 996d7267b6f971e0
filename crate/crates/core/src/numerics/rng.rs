use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::matrix::{axpy, dot, norm, Matrix};

/// Seeded ChaCha8 stream. Platform independent for a given seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent stream for shard `index` of a seed.
    pub fn derive(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index.wrapping_add(1));
        Self { inner: rng }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform integer in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        self.inner.random_range(lo..=hi)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn normal_vec(&mut self, len: usize, std: f64) -> Vec<f64> {
        (0..len).map(|_| std * self.normal()).collect()
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize, std: f64) -> Matrix {
        Matrix::from_vec(rows, cols, self.normal_vec(rows * cols, std)).expect("finite gaussian samples")
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// Haar-distributed orthogonal matrix: Gram-Schmidt on Gaussian columns.
    pub fn random_orthogonal(&mut self, n: usize) -> Matrix {
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
        while columns.len() < n {
            let mut c = self.normal_vec(n, 1.0);
            for _ in 0..2 {
                for b in &columns {
                    let p = dot(b, &c);
                    axpy(-p, b, &mut c);
                }
            }
            let len = norm(&c);
            if len < 1e-8 {
                continue;
            }
            c.iter_mut().for_each(|x| *x /= len);
            columns.push(c);
        }
        Matrix::from_columns(n, &columns).expect("finite orthogonal columns")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for _ in 0..100 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn derived_streams_differ() {
        let mut a = RngStream::derive(1, 0);
        let mut b = RngStream::derive(1, 1);
        assert_ne!(a.uniform(), b.uniform());
    }

    #[test]
    fn orthogonal_is_orthogonal() {
        let q = RngStream::new(3).random_orthogonal(5);
        let g = q.transpose().matmul(&q).unwrap();
        assert!(g.sub(&Matrix::identity(5)).unwrap().frobenius_norm() < 1e-12);
    }
}
