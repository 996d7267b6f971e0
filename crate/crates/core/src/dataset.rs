use serde::{Deserialize, Serialize};

use crate::error::{contract, input, Result};
use crate::numerics::Matrix;

/// Context `z` (d×n) with target `y` (length d).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSample")]
pub struct SequenceSample {
    pub z: Matrix,
    pub y: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSample {
    z: Matrix,
    y: Vec<f64>,
}

impl TryFrom<RawSample> for SequenceSample {
    type Error = crate::Error;

    fn try_from(raw: RawSample) -> Result<Self> {
        SequenceSample::new(raw.z, raw.y)
    }
}

impl SequenceSample {
    pub fn new(z: Matrix, y: Vec<f64>) -> Result<Self> {
        if z.rows() == 0 || z.cols() == 0 {
            return Err(contract("sample context must be non-empty"));
        }
        if z.rows() != y.len() {
            return Err(contract(format!("context has {} rows but target has length {}", z.rows(), y.len())));
        }
        if !z.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(input("sample entries must be finite"));
        }
        Ok(Self { z, y })
    }

    pub fn d(&self) -> usize {
        self.z.rows()
    }

    pub fn len(&self) -> usize {
        self.z.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.z.cols() == 0
    }
}

/// Non-empty list of samples sharing the token dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    samples: Vec<SequenceSample>,
}

impl Dataset {
    pub fn new(samples: Vec<SequenceSample>) -> Result<Self> {
        let d = samples.first().ok_or_else(|| input("dataset is empty"))?.d();
        if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.d() != d) {
            return Err(input(format!("sample {i} has d={}, expected {d}", s.d())));
        }
        Ok(Self { d, samples })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[SequenceSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<SequenceSample> {
        self.samples
    }

    pub fn n_max(&self) -> usize {
        self.samples.iter().map(|s| s.len()).max().unwrap_or(0)
    }

    /// Samples of `self` followed by those of `other`.
    pub fn union(&self, other: &Dataset) -> Result<Dataset> {
        if self.d != other.d {
            return Err(contract(format!("cannot join d={} with d={}", self.d, other.d)));
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Dataset::new(samples)
    }

    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let samples = indices
            .iter()
            .map(|&i| self.samples.get(i).cloned().ok_or_else(|| contract(format!("no sample {i}"))))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_samples() {
        assert!(SequenceSample::new(Matrix::zeros(2, 1), vec![0.0]).is_err());
        assert!(SequenceSample::new(Matrix::zeros(2, 0), vec![0.0; 2]).is_err());
        assert!(Dataset::new(vec![]).is_err());
        let a = SequenceSample::new(Matrix::zeros(2, 3), vec![0.0; 2]).unwrap();
        let b = SequenceSample::new(Matrix::zeros(1, 1), vec![0.0]).unwrap();
        assert!(Dataset::new(vec![a.clone(), b]).is_err());
        assert_eq!(Dataset::new(vec![a]).unwrap().n_max(), 3);
    }

    #[test]
    fn json_sample_is_validated() {
        assert!(serde_json::from_str::<SequenceSample>(r#"{"z":[[1.0]],"y":[1.0,2.0]}"#).is_err());
        let s: SequenceSample = serde_json::from_str(r#"{"z":[[1.0,2.0]],"y":[3.0]}"#).unwrap();
        assert_eq!(s.len(), 2);
    }
}
