//! Identifiability certificates from the second moment of symmetric features.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{contract, Error, Result};
use crate::features::{param_distance, psi, sym_features, sym_features_centered};
use crate::learner::{fit_regression, FitOptions};
use crate::model::MhlaParams;
use crate::numerics::parallel::map_chunks;
use crate::numerics::{sparse_gram, sym_eigen, Matrix, RngStream, SparseRow};

/// Eigenvalues above `THRESHOLD_SCALE · max(λ_max, 1)` count as nonzero.
pub const THRESHOLD_SCALE: f64 = 1e-9;

pub const VERDICT_NOTE: &str = "requires realizability or H >= d^2";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub psi: usize,
    pub samples: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub rank_estimate: usize,
    pub identifiable: bool,
    pub threshold_used: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub centered_m2: Option<f64>,
    pub note: String,
    /// Eigenvalues of `Λ_D`, descending.
    #[serde(skip)]
    pub spectrum: Vec<f64>,
}

fn feature_rows(data: &Dataset, centered: Option<f64>) -> Vec<SparseRow> {
    map_chunks(data.len(), 64, |r| {
        data.samples()[r]
            .iter()
            .map(|s| {
                let h = match centered {
                    Some(m2) => sym_features_centered(&s.z, m2),
                    None => sym_features(&s.z),
                };
                SparseRow::from_dense(&h)
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// `Λ_D = (1/N) Σ ℋ(Z_i) ℋ(Z_i)ᵀ`, `ψ×ψ`.
pub fn second_moment(data: &Dataset, centered: Option<f64>) -> Matrix {
    let rows = feature_rows(data, centered);
    sparse_gram(&rows, psi(data.d())).scaled(1.0 / data.len() as f64)
}

/// Spectrum of `Λ_D` and the identifiability verdict.
///
/// Feature coordinates that vanish on every sample are split off first; each contributes an
/// exact zero eigenvalue.
pub fn certify(data: &Dataset, centered: Option<f64>) -> Result<CertificateReport> {
    let d = data.d();
    let m = psi(d);
    let mut rows = feature_rows(data, centered);
    let mut compact = vec![usize::MAX; m];
    for row in &rows {
        for &i in &row.idx {
            compact[i] = 0;
        }
    }
    let mut live = 0;
    for c in compact.iter_mut().filter(|c| **c != usize::MAX) {
        *c = live;
        live += 1;
    }
    for row in &mut rows {
        row.idx.iter_mut().for_each(|i| *i = compact[*i]);
    }
    let lambda = sparse_gram(&rows, live).scaled(1.0 / data.len() as f64);
    let mut spectrum = sym_eigen(&lambda)?.values;
    spectrum.resize(m, 0.0);
    spectrum.sort_by(|a, b| b.total_cmp(a));

    let lambda_max = spectrum.first().copied().unwrap_or(0.0);
    let lambda_min = spectrum.last().copied().unwrap_or(0.0);
    let threshold_used = THRESHOLD_SCALE * lambda_max.max(1.0);
    let rank_estimate = spectrum.iter().filter(|&&v| v > threshold_used).count();
    Ok(CertificateReport {
        psi: m,
        samples: data.len(),
        lambda_min,
        lambda_max,
        rank_estimate,
        identifiable: lambda_min > threshold_used,
        threshold_used,
        centered_m2: centered,
        note: VERDICT_NOTE.to_owned(),
        spectrum,
    })
}

/// `(ε / λ_min) ‖Z‖_F⁶`.
pub fn error_bound(epsilon: f64, lambda_min: f64, z: &Matrix) -> Result<f64> {
    if !(lambda_min > 0.0) {
        return Err(Error::Domain(format!("bound is vacuous for lambda_min = {lambda_min}")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::Domain(format!("epsilon must be non-negative, got {epsilon}")));
    }
    Ok(epsilon / lambda_min * z.frobenius_norm().powi(6))
}

/// Takes `degenerate[i]` with probability `fraction`, else `identifiable[i]`.
pub fn mix_datasets(identifiable: &Dataset, degenerate: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if identifiable.d() != degenerate.d() {
        return Err(contract(format!(
            "datasets have d={} and d={}",
            identifiable.d(),
            degenerate.d()
        )));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(contract(format!("mix fraction must lie in [0, 1], got {fraction}")));
    }
    let n = identifiable.len().min(degenerate.len());
    let mut rng = RngStream::new(seed);
    let samples = (0..n)
        .map(|i| {
            if rng.uniform() < fraction {
                degenerate.samples()[i].clone()
            } else {
                identifiable.samples()[i].clone()
            }
        })
        .collect();
    Dataset::new(samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRow {
    pub fraction: f64,
    pub seed: u64,
    pub lambda_min: f64,
    pub identifiable: bool,
    pub recovery_distance: f64,
}

/// For each fraction: mix, certify, fit and measure `param_distance` to `truth`.
pub fn mixture_sweep(
    identifiable: &Dataset,
    degenerate: &Dataset,
    truth: &MhlaParams,
    fractions: &[f64],
    seed: u64,
    fit: &FitOptions,
) -> Result<Vec<MixtureRow>> {
    if truth.d() != identifiable.d() {
        return Err(contract("ground truth dimension does not match the datasets"));
    }
    fractions
        .iter()
        .map(|&fraction| {
            let mixed = mix_datasets(identifiable, degenerate, fraction, seed)?;
            let cert = certify(&mixed, None)?;
            let report = fit_regression(&mixed, fit)?;
            Ok(MixtureRow {
                fraction,
                seed,
                lambda_min: cert.lambda_min,
                identifiable: cert.identifiable,
                recovery_distance: param_distance(&report.learned, truth)?,
            })
        })
        .collect()
}
