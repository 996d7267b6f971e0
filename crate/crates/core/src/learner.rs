//! Regression learner (features → least squares → SVD fold-back) and a gradient-descent baseline.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{contract, input, Error, Result};
use crate::features::{pair_count, psi};
use crate::model::{Head, MhlaParams, DEFAULT_RANK_TOL};
use crate::numerics::parallel::map_chunks;
use crate::numerics::{sparse_gram, solve_normal_equations, Matrix, Ridge, RngStream, SparseRow};

const CHUNK: usize = 64;

/// Column space of the per-output regression.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Merged `{j,k}` columns, `ψ` unknowns; returns the same minimizer as `Full` with the
    /// duplicated coefficients split evenly.
    #[default]
    Symmetric,
    /// Raw `(j,k,ℓ)` columns, `d³` unknowns per output coordinate.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub ridge: Ridge,
    pub rank_tol: f64,
    pub formulation: Formulation,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { ridge: Ridge::Auto, rank_tol: DEFAULT_RANK_TOL, formulation: Formulation::Symmetric }
    }
}

impl FitOptions {
    pub fn exact_ols() -> Self {
        Self { ridge: Ridge::Fixed(0.0), ..Self::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub learned: MhlaParams,
    /// Mean over samples of `‖forward_last(learned, Z) − y‖²`.
    pub train_mse: f64,
    /// Number of heads carrying a nonzero singular value of the learned regressor.
    pub regressor_rank: usize,
    pub residual_per_sample: Vec<f64>,
    #[serde(skip)]
    pub wall_time: f64,
}

/// Unfolded regression solution.
#[derive(Debug, Clone)]
pub struct RegressorFit {
    /// `d²×d²`, row `(a,j)`, column `(k,ℓ)`.
    pub w: Matrix,
    pub ridge_used: f64,
    /// Mean over samples of the squared residual norm of the linear model itself.
    pub regression_mse: f64,
}

fn feature_len(d: usize, formulation: Formulation) -> usize {
    match formulation {
        Formulation::Symmetric => psi(d),
        Formulation::Full => d * d * d,
    }
}

fn regression_features(z: &Matrix, formulation: Formulation) -> SparseRow {
    let d = z.rows();
    let g = z.row_gram();
    let last = z.last_column();
    let mut row = SparseRow { idx: Vec::new(), val: Vec::new() };
    let mut push = |i: usize, v: f64| {
        if v != 0.0 {
            row.idx.push(i);
            row.val.push(v);
        }
    };
    match formulation {
        Formulation::Symmetric => {
            let s = std::f64::consts::SQRT_2;
            let mut base = 0;
            for j in 0..d {
                for k in j + 1..d {
                    for (l, &x) in last.iter().enumerate() {
                        push(base + l, s * g[(j, k)] * x);
                    }
                    base += d;
                }
            }
            for j in 0..d {
                for (l, &x) in last.iter().enumerate() {
                    push(base + j * d + l, g[(j, j)] * x);
                }
            }
        }
        Formulation::Full => {
            for j in 0..d {
                for k in 0..d {
                    for (l, &x) in last.iter().enumerate() {
                        push((j * d + k) * d + l, g[(j, k)] * x);
                    }
                }
            }
        }
    }
    row
}

/// Solves the least-squares regression for the `d²×d²` regressor without folding it.
pub fn fit_regressor(data: &Dataset, opts: &FitOptions) -> Result<RegressorFit> {
    let d = data.d();
    let m = feature_len(d, opts.formulation);
    let mut rows: Vec<SparseRow> = map_chunks(data.len(), CHUNK, |r| {
        data.samples()[r].iter().map(|s| regression_features(&s.z, opts.formulation)).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();

    // Columns that vanish on every sample get a zero coefficient under the minimum-norm choice.
    let mut compact = vec![usize::MAX; m];
    let mut active = Vec::new();
    for row in &rows {
        for &i in &row.idx {
            if compact[i] == usize::MAX {
                compact[i] = 0;
            }
        }
    }
    for (i, c) in compact.iter_mut().enumerate() {
        if *c != usize::MAX {
            *c = active.len();
            active.push(i);
        }
    }
    for row in &mut rows {
        row.idx.iter_mut().for_each(|i| *i = compact[*i]);
    }
    let mc = active.len();

    let trace: f64 = rows.iter().flat_map(|r| r.val.iter()).map(|v| v * v).sum();
    let ridge = opts.ridge.resolve(trace, d * d * d);
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(contract(format!("ridge must be finite and non-negative, got {ridge}")));
    }

    let gram = sparse_gram(&rows, mc);
    let mut rhs = vec![vec![0.0; mc]; d];
    for (row, s) in rows.iter().zip(data.samples()) {
        for (a, b) in rhs.iter_mut().enumerate() {
            let y = s.y[a];
            if y == 0.0 {
                continue;
            }
            for (&i, &v) in row.idx.iter().zip(&row.val) {
                b[i] += v * y;
            }
        }
    }
    let coeffs = if mc == 0 { vec![Vec::new(); d] } else { solve_normal_equations(&gram, &rhs, ridge)? };

    let mut sq = 0.0;
    for (row, s) in rows.iter().zip(data.samples()) {
        for (a, c) in coeffs.iter().enumerate() {
            let pred: f64 = row.idx.iter().zip(&row.val).map(|(&i, &v)| c[i] * v).sum();
            sq += (pred - s.y[a]).powi(2);
        }
    }
    let regression_mse = sq / data.len() as f64;

    let dd = d * d;
    let mut w = Matrix::zeros(dd, dd);
    let layout = match opts.formulation {
        Formulation::Symmetric => Some(crate::features::sym_layout(d)),
        Formulation::Full => None,
    };
    for (a, c) in coeffs.iter().enumerate() {
        for (&col, &coef) in active.iter().zip(c) {
            match &layout {
                Some(layout) => {
                    let (j, k, l) = layout[col];
                    if j == k {
                        w[(a * d + j, j * d + l)] = coef;
                    } else {
                        let half = coef / std::f64::consts::SQRT_2;
                        w[(a * d + j, k * d + l)] = half;
                        w[(a * d + k, j * d + l)] = half;
                    }
                }
                None => {
                    let (j, kl) = (col / dd, col % dd);
                    w[(a * d + j, kl)] = coef;
                }
            }
        }
    }
    debug_assert_eq!(pair_count(d) * d + dd, psi(d));
    Ok(RegressorFit { w, ridge_used: ridge, regression_mse })
}

/// Regression on cubic features followed by an SVD fold into at most `d²` heads.
pub fn fit_regression(data: &Dataset, opts: &FitOptions) -> Result<FitReport> {
    let start = Instant::now();
    let fit = fit_regressor(data, opts)?;
    let learned = MhlaParams::fold_regressor(&fit.w, opts.rank_tol)?;
    let regressor_rank = if learned == MhlaParams::zero(data.d()) { 0 } else { learned.head_count() };
    let residual_per_sample = residuals(&learned, data)?;
    let train_mse = mean(&residual_per_sample);
    Ok(FitReport {
        method: "regression".to_owned(),
        learned,
        train_mse,
        regressor_rank,
        residual_per_sample,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `‖forward_last(params, Z_i) − y_i‖²` for every sample.
pub fn residuals(params: &MhlaParams, data: &Dataset) -> Result<Vec<f64>> {
    if params.d() != data.d() {
        return Err(contract(format!("params have d={}, data has d={}", params.d(), data.d())));
    }
    let parts = map_chunks(data.len(), CHUNK, |r| {
        data.samples()[r]
            .iter()
            .map(|s| {
                let f = params.forward_last(&s.z)?;
                Ok(f.iter().zip(&s.y).map(|(a, b)| (a - b).powi(2)).sum())
            })
            .collect::<Result<Vec<f64>>>()
    });
    let mut out = Vec::with_capacity(data.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Mean over samples of `‖forward_last(params, Z_i) − y_i‖²`.
pub fn mse(params: &MhlaParams, data: &Dataset) -> Result<f64> {
    Ok(mean(&residuals(params, data)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdOptions {
    pub heads: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

/// Per-sample quantities reused across epochs.
struct Prepared {
    g: Matrix,
    last: Vec<f64>,
    y: Vec<f64>,
}

fn prepare(data: &Dataset) -> Vec<Prepared> {
    data.samples()
        .iter()
        .map(|s| Prepared { g: s.z.row_gram(), last: s.z.last_column(), y: s.y.clone() })
        .collect()
}

fn loss_and_gradient(params: &MhlaParams, prepared: &[Prepared]) -> (f64, Vec<Head>) {
    let d = params.d();
    let parts = map_chunks(prepared.len(), CHUNK, |r| {
        let mut loss = 0.0;
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> =
            params.heads().iter().map(|_| (vec![0.0; d * d], vec![0.0; d * d])).collect();
        for p in &prepared[r] {
            let ctx: Vec<Vec<f64>> = params
                .heads()
                .iter()
                .map(|h| p.g.matvec(&h.q.matvec(&p.last).expect("d")).expect("d"))
                .collect();
            let mut resid: Vec<f64> = p.y.iter().map(|y| -y).collect();
            for (h, c) in params.heads().iter().zip(&ctx) {
                for (r, x) in resid.iter_mut().zip(h.v.matvec(c).expect("d")) {
                    *r += x;
                }
            }
            loss += resid.iter().map(|r| r * r).sum::<f64>();
            for ((h, c), (gv, gq)) in params.heads().iter().zip(&ctx).zip(grads.iter_mut()) {
                for a in 0..d {
                    for b in 0..d {
                        gv[a * d + b] += resid[a] * c[b];
                    }
                }
                let u = p.g.matvec(&h.v.tr_matvec(&resid).expect("d")).expect("d");
                for a in 0..d {
                    for b in 0..d {
                        gq[a * d + b] += u[a] * p.last[b];
                    }
                }
            }
        }
        (loss, grads)
    });
    let n = prepared.len() as f64;
    let mut loss = 0.0;
    let mut total: Vec<(Vec<f64>, Vec<f64>)> =
        params.heads().iter().map(|_| (vec![0.0; d * d], vec![0.0; d * d])).collect();
    for (l, g) in parts {
        loss += l;
        for ((tv, tq), (gv, gq)) in total.iter_mut().zip(g) {
            tv.iter_mut().zip(gv).for_each(|(t, x)| *t += x);
            tq.iter_mut().zip(gq).for_each(|(t, x)| *t += x);
        }
    }
    let heads = total
        .into_iter()
        .map(|(gv, gq)| Head {
            v: Matrix::from_vec(d, d, gv.into_iter().map(|x| 2.0 * x / n).collect()).unwrap_or(Matrix::zeros(d, d)),
            q: Matrix::from_vec(d, d, gq.into_iter().map(|x| 2.0 * x / n).collect()).unwrap_or(Matrix::zeros(d, d)),
        })
        .collect();
    (loss / n, heads)
}

/// Mean squared error and its gradient with respect to every `V_h` and `Q_h`.
pub fn mse_gradient(params: &MhlaParams, data: &Dataset) -> Result<(f64, Vec<Head>)> {
    if params.d() != data.d() {
        return Err(contract(format!("params have d={}, data has d={}", params.d(), data.d())));
    }
    Ok(loss_and_gradient(params, &prepare(data)))
}

/// Full-batch gradient descent from a Gaussian initialization with variance `1/√d`.
pub fn fit_gd(data: &Dataset, opts: &GdOptions) -> Result<FitReport> {
    if opts.heads == 0 {
        return Err(contract("gradient descent needs at least one head"));
    }
    if !(opts.lr >= 0.0) || !opts.lr.is_finite() {
        return Err(contract(format!("learning rate must be finite and non-negative, got {}", opts.lr)));
    }
    let start = Instant::now();
    let d = data.d();
    let mut rng = RngStream::new(opts.seed);
    let std = (d as f64).powf(-0.25);
    let heads = (0..opts.heads)
        .map(|_| Head { v: rng.normal_matrix(d, d, std), q: rng.normal_matrix(d, d, std) })
        .collect();
    let mut params = MhlaParams::new(d, heads)?;
    let prepared = prepare(data);
    for epoch in 0..opts.epochs {
        let (loss, grads) = loss_and_gradient(&params, &prepared);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("gradient descent diverged at epoch {epoch}")));
        }
        let heads = params
            .heads()
            .iter()
            .zip(&grads)
            .map(|(h, g)| Head { v: h.v.sub(&g.v.scaled(opts.lr)).expect("d"), q: h.q.sub(&g.q.scaled(opts.lr)).expect("d") })
            .collect::<Vec<_>>();
        if heads.iter().any(|h| !h.v.is_finite() || !h.q.is_finite()) {
            return Err(Error::Numeric(format!("gradient descent diverged at epoch {epoch}")));
        }
        params = MhlaParams::new(d, heads)?;
    }
    let residual_per_sample = residuals(&params, data)?;
    let train_mse = mean(&residual_per_sample);
    if !train_mse.is_finite() {
        return Err(Error::Numeric(format!("gradient descent diverged at epoch {}", opts.epochs)));
    }
    let regressor_rank = crate::numerics::svd(&params.flatten())?.rank(DEFAULT_RANK_TOL);
    Ok(FitReport {
        method: "gd".to_owned(),
        learned: params,
        train_mse,
        regressor_rank,
        residual_per_sample,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// `⌈(d⁴ + ln(1/δ)) / ε⌉`.
pub fn sample_budget(d: usize, eps: f64, delta: f64) -> Result<usize> {
    if d == 0 {
        return Err(input("d must be positive"));
    }
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(input(format!("eps and delta must lie in (0, 1), got {eps} and {delta}")));
    }
    let d4 = (d as f64).powi(4);
    Ok(((d4 + (1.0 / delta).ln()) / eps).ceil() as usize)
}
