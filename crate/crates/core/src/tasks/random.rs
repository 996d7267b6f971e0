use crate::dataset::{Dataset, SequenceSample};
use crate::error::{input, Result};
use crate::model::{Head, MhlaParams};
use crate::numerics::RngStream;

/// Random ground truth with `V, Q ~ N(0, 1/√d)` entries and realizable Gaussian inputs.
///
/// Each context has `n ~ U{1..n_max}` columns with `N(0, 1/√n_max)` entries.
pub fn gen_random_mhla(
    d: usize,
    n_max: usize,
    samples: usize,
    head_count: usize,
    seed: u64,
) -> Result<(Dataset, MhlaParams)> {
    if d == 0 || n_max == 0 || samples == 0 || head_count == 0 {
        return Err(input("d, n_max, sample count and head count must be positive"));
    }
    let mut rng = RngStream::derive(seed, 0);
    let param_std = (d as f64).powf(-0.25);
    let heads = (0..head_count)
        .map(|_| Head { v: rng.normal_matrix(d, d, param_std), q: rng.normal_matrix(d, d, param_std) })
        .collect();
    let truth = MhlaParams::new(d, heads)?;
    let data = gen_inputs(&truth, n_max, samples, seed)?;
    Ok((data, truth))
}

/// Fresh realizable samples for a given model, drawn like `gen_random_mhla` inputs.
pub fn gen_inputs(truth: &MhlaParams, n_max: usize, samples: usize, seed: u64) -> Result<Dataset> {
    if n_max == 0 || samples == 0 {
        return Err(input("n_max and sample count must be positive"));
    }
    let mut rng = RngStream::derive(seed, 1);
    let input_std = (n_max as f64).powf(-0.25);
    let samples = (0..samples)
        .map(|_| {
            let n = rng.range_inclusive(1, n_max);
            let z = rng.normal_matrix(truth.d(), n, input_std);
            let y = truth.forward_last(&z)?;
            SequenceSample::new(z, y)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples)
}

/// Adds i.i.d. `N(0, sigma²)` noise to every target coordinate.
pub fn add_label_noise(data: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(input(format!("noise level must be finite and non-negative, got {sigma}")));
    }
    let mut rng = RngStream::derive(seed, 2);
    let samples = data
        .samples()
        .iter()
        .map(|s| {
            let y = s.y.iter().map(|v| v + sigma * rng.normal()).collect();
            SequenceSample::new(s.z.clone(), y)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::mse;

    #[test]
    fn realizable_and_deterministic() {
        let (data, truth) = gen_random_mhla(3, 5, 40, 2, 9).unwrap();
        assert!(mse(&truth, &data).unwrap() <= 1e-18);
        assert!(data.samples().iter().all(|s| (1..=5).contains(&s.len())));
        let (again, truth2) = gen_random_mhla(3, 5, 40, 2, 9).unwrap();
        assert_eq!(again, data);
        assert_eq!(truth2, truth);
        assert!(gen_random_mhla(0, 5, 40, 2, 9).is_err());
    }
}
