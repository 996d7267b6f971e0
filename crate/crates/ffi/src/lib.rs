//! C ABI over `mhla-core`.
//!
//! Every fallible function returns an [`MhlaStatus`]; on failure the message is available from
//! [`mhla_last_error`] on the same thread. Handles are opaque and released with their `_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mhla_core::certificate::certify;
use mhla_core::learner::{fit_regression, FitOptions};
use mhla_core::numerics::{Matrix, Ridge};
use mhla_core::tasks::gen_random_mhla;
use mhla_core::{Dataset, Error, MhlaParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MhlaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numeric = 3,
    Domain = 4,
    Compile = 5,
    Io = 6,
    Parse = 7,
    Panic = 8,
}

/// Learned or ground-truth attention parameters.
pub struct MhlaParamsHandle(MhlaParams);

/// In-memory dataset.
pub struct MhlaDatasetHandle(Dataset);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MhlaCertificate {
    pub psi: usize,
    pub samples: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub threshold_used: f64,
    pub rank_estimate: usize,
    pub identifiable: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MhlaStatus {
    match e {
        Error::Contract(_) | Error::Input(_) => MhlaStatus::InvalidArgument,
        Error::Numeric(_) => MhlaStatus::Numeric,
        Error::Domain(_) => MhlaStatus::Domain,
        Error::Compile(_) => MhlaStatus::Compile,
        Error::Io(_) => MhlaStatus::Io,
        Error::Json(_) => MhlaStatus::Parse,
    }
}

struct Failure(MhlaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MhlaStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MhlaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MhlaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MhlaStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MhlaStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failure on this thread, or null. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn mhla_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, nul-terminated library version.
#[no_mangle]
pub extern "C" fn mhla_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mhla_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses params from JSON.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mhla_params_from_json(json: *const c_char, out_params: *mut *mut MhlaParamsHandle) -> MhlaStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let slot = out(out_params, "out_params")?;
        let params = MhlaParams::from_json(text)?;
        *slot = Box::into_raw(Box::new(MhlaParamsHandle(params)));
        Ok(())
    })
}

/// Serializes params to JSON; free the result with [`mhla_string_free`].
///
/// # Safety
/// `params` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mhla_params_to_json(params: *const MhlaParamsHandle, out_json: *mut *mut c_char) -> MhlaStatus {
    guard(|| {
        let p = handle(params, "params")?;
        let slot = out(out_json, "out_json")?;
        let text = p.0.to_json()?;
        *slot = CString::new(text).expect("json has no nul bytes").into_raw();
        Ok(())
    })
}

/// # Safety
/// `params` must be null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mhla_params_free(params: *mut MhlaParamsHandle) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Embedding dimension, or 0 for a null handle.
///
/// # Safety
/// `params` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mhla_params_dim(params: *const MhlaParamsHandle) -> usize {
    params.as_ref().map_or(0, |p| p.0.d())
}

/// Number of heads, or 0 for a null handle.
///
/// # Safety
/// `params` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mhla_params_head_count(params: *const MhlaParamsHandle) -> usize {
    params.as_ref().map_or(0, |p| p.0.head_count())
}

/// Output at the last position of `z`, a row-major `d x n` matrix; writes `d` values to `out`.
///
/// # Safety
/// `z` must hold `d * n` readable values and `out` `d` writable values.
#[no_mangle]
pub unsafe extern "C" fn mhla_params_forward_last(
    params: *const MhlaParamsHandle,
    z: *const f64,
    n: usize,
    out_y: *mut f64,
) -> MhlaStatus {
    guard(|| {
        let p = handle(params, "params")?;
        if z.is_null() {
            return Err(null("z"));
        }
        if out_y.is_null() {
            return Err(null("out_y"));
        }
        let d = p.0.d();
        let zm = Matrix::from_vec(d, n, std::slice::from_raw_parts(z, d * n).to_vec())?;
        let y = p.0.forward_last(&zm)?;
        std::slice::from_raw_parts_mut(out_y, d).copy_from_slice(&y);
        Ok(())
    })
}

/// Reads a JSON-lines dataset.
///
/// # Safety
/// `path` must be a nul-terminated string; `out_data` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mhla_dataset_read(path: *const c_char, out_data: *mut *mut MhlaDatasetHandle) -> MhlaStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let slot = out(out_data, "out_data")?;
        let data = mhla_core::io::read_dataset(Path::new(path))?;
        *slot = Box::into_raw(Box::new(MhlaDatasetHandle(data)));
        Ok(())
    })
}

/// Samples a random ground truth and a realizable dataset. `out_truth` may be null.
///
/// # Safety
/// `out_data` must be writable; `out_truth` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn mhla_dataset_gen_random(
    d: usize,
    n_max: usize,
    samples: usize,
    heads: usize,
    seed: u64,
    out_data: *mut *mut MhlaDatasetHandle,
    out_truth: *mut *mut MhlaParamsHandle,
) -> MhlaStatus {
    guard(|| {
        let slot = out(out_data, "out_data")?;
        let (data, truth) = gen_random_mhla(d, n_max, samples, heads, seed)?;
        *slot = Box::into_raw(Box::new(MhlaDatasetHandle(data)));
        if let Some(t) = out_truth.as_mut() {
            *t = Box::into_raw(Box::new(MhlaParamsHandle(truth)));
        }
        Ok(())
    })
}

/// # Safety
/// `data` must be null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mhla_dataset_free(data: *mut MhlaDatasetHandle) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mhla_dataset_len(data: *const MhlaDatasetHandle) -> usize {
    data.as_ref().map_or(0, |d| d.0.len())
}

/// Embedding dimension, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mhla_dataset_dim(data: *const MhlaDatasetHandle) -> usize {
    data.as_ref().map_or(0, |d| d.0.d())
}

/// Regression fit with SVD fold-back. A negative `ridge` selects the automatic ridge.
/// `out_train_mse` may be null.
///
/// # Safety
/// `data` must be a live handle; `out_params` must be writable; `out_train_mse` null or writable.
#[no_mangle]
pub unsafe extern "C" fn mhla_fit_regression(
    data: *const MhlaDatasetHandle,
    ridge: f64,
    out_params: *mut *mut MhlaParamsHandle,
    out_train_mse: *mut f64,
) -> MhlaStatus {
    guard(|| {
        let data = handle(data, "data")?;
        let slot = out(out_params, "out_params")?;
        if ridge.is_nan() {
            return Err(Failure(MhlaStatus::InvalidArgument, "ridge is NaN".into()));
        }
        let ridge = if ridge < 0.0 { Ridge::Auto } else { Ridge::Fixed(ridge) };
        let report = fit_regression(&data.0, &FitOptions { ridge, ..FitOptions::default() })?;
        if let Some(m) = out_train_mse.as_mut() {
            *m = report.train_mse;
        }
        *slot = Box::into_raw(Box::new(MhlaParamsHandle(report.learned)));
        Ok(())
    })
}

/// Identifiability certificate of a dataset.
///
/// # Safety
/// `data` must be a live handle; `out_cert` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mhla_certify(data: *const MhlaDatasetHandle, out_cert: *mut MhlaCertificate) -> MhlaStatus {
    guard(|| {
        let data = handle(data, "data")?;
        let slot = out(out_cert, "out_cert")?;
        let r = certify(&data.0, None)?;
        *slot = MhlaCertificate {
            psi: r.psi,
            samples: r.samples,
            lambda_min: r.lambda_min,
            lambda_max: r.lambda_max,
            threshold_used: r.threshold_used,
            rank_estimate: r.rank_estimate,
            identifiable: r.identifiable,
        };
        Ok(())
    })
}
