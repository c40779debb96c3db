//! C ABI over the `spcrsvd` library.
//!
//! Every entry point returns an [`SpcrStatus`]; on failure a description is
//! available from [`spcr_last_error_message`] on the same thread. Handles
//! are opaque and must be released with the matching `*_free` function.
//! Matrices cross the boundary as dense row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use spcrsvd::error::SpcrError;
use spcrsvd::io::{load_model, save_model, ModelFile};
use spcrsvd::kernels::{Mat, Vector};
use spcrsvd::model::{preprocess, Algorithm, Dataset, FitConfig};
use spcrsvd::selection::{cross_validate, CvPlan};
use spcrsvd::solver::fit;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpcrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    RankDeficient = 5,
    NotPositiveDefinite = 6,
    /// The solver hit its iteration cap; the returned model is still valid.
    NotConverged = 7,
    Parse = 8,
    Io = 9,
    ModelFormat = 10,
    FoldTooSmall = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpcrAlgorithm {
    Admm = 0,
    Ladmm = 1,
}

/// Solver settings; initialize with [`spcr_fit_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpcrFitConfig {
    pub k: usize,
    pub w: f64,
    pub lambda_v: f64,
    pub lambda_beta: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub max_iter: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub algorithm: SpcrAlgorithm,
    pub seed: u64,
}

impl From<&SpcrFitConfig> for FitConfig {
    fn from(c: &SpcrFitConfig) -> Self {
        FitConfig {
            k: c.k,
            w: c.w,
            lambda_v: c.lambda_v,
            lambda_beta: c.lambda_beta,
            rho1: c.rho1,
            rho2: c.rho2,
            rho3: c.rho3,
            max_iter: c.max_iter,
            tol_abs: c.tol_abs,
            tol_rel: c.tol_rel,
            algorithm: match c.algorithm {
                SpcrAlgorithm::Admm => Algorithm::Admm,
                SpcrAlgorithm::Ladmm => Algorithm::Ladmm,
            },
            seed: c.seed,
        }
    }
}

/// Preprocessed training data.
pub struct SpcrDataset {
    inner: Dataset,
}

/// A fitted model.
pub struct SpcrModel {
    inner: ModelFile,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &SpcrError) -> SpcrStatus {
    match e {
        SpcrError::DimensionMismatch(_) => SpcrStatus::DimensionMismatch,
        SpcrError::NonFinite(_) => SpcrStatus::NonFinite,
        SpcrError::RankDeficient { .. } => SpcrStatus::RankDeficient,
        SpcrError::NotPositiveDefinite => SpcrStatus::NotPositiveDefinite,
        SpcrError::Decomposition(_) => SpcrStatus::NotConverged,
        SpcrError::InvalidConfig(_) | SpcrError::InvalidCase(_) => SpcrStatus::InvalidArgument,
        SpcrError::FoldTooSmall { .. } => SpcrStatus::FoldTooSmall,
        SpcrError::Parse { .. } => SpcrStatus::Parse,
        SpcrError::ModelFormat(_) => SpcrStatus::ModelFormat,
        SpcrError::Io(_) => SpcrStatus::Io,
    }
}

struct Failure(SpcrStatus, String);

impl From<SpcrError> for Failure {
    fn from(e: SpcrError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SpcrStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<SpcrStatus, Failure>) -> SpcrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => {
            if status == SpcrStatus::Ok {
                set_error("");
            }
            status
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SpcrStatus::Panic
        }
    }
}

unsafe fn matrix_from(data: *const f64, rows: usize, cols: usize, what: &str) -> Result<Mat, Failure> {
    if data.is_null() {
        return Err(null(what));
    }
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Failure(SpcrStatus::InvalidArgument, format!("{what} is too large")))?;
    let slice = std::slice::from_raw_parts(data, len);
    Ok(Mat::from_row_slice(rows, cols, slice))
}

unsafe fn path_from(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Failure(SpcrStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

fn wrap_model(model: spcrsvd::model::SpcrsvdModel, out: *mut *mut SpcrModel) -> SpcrStatus {
    let status = if model.diagnostics.converged {
        SpcrStatus::Ok
    } else {
        set_error("iteration cap reached before convergence");
        SpcrStatus::NotConverged
    };
    let covariates = default_names(model.p());
    let handle = Box::new(SpcrModel {
        inner: ModelFile {
            model,
            target: "y".into(),
            covariates,
        },
    });
    // SAFETY: callers check `out` for null before reaching here.
    unsafe { *out = Box::into_raw(handle) };
    status
}

/// Message describing the last failure on this thread (empty after a
/// successful call). The pointer stays valid until the next call on the
/// same thread.
#[no_mangle]
pub extern "C" fn spcr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Writes the library defaults (k = 1, w = 0.1, no penalties, ρ = 1,
/// 2000 iterations, ADMM) into `out`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `SpcrFitConfig`.
#[no_mangle]
pub unsafe extern "C" fn spcr_fit_config_default(out: *mut SpcrFitConfig) -> SpcrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let d = FitConfig::default();
        *out = SpcrFitConfig {
            k: d.k,
            w: d.w,
            lambda_v: d.lambda_v,
            lambda_beta: d.lambda_beta,
            rho1: d.rho1,
            rho2: d.rho2,
            rho3: d.rho3,
            max_iter: d.max_iter,
            tol_abs: d.tol_abs,
            tol_rel: d.tol_rel,
            algorithm: SpcrAlgorithm::Admm,
            seed: d.seed,
        };
        Ok(SpcrStatus::Ok)
    })
}

/// Centers (and optionally standardizes) `x` (n × p, row-major) and stores
/// it with the response `y` (length n).
///
/// # Safety
/// `x` must point to `n * p` readable doubles, `y` to `n`, and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn spcr_dataset_new(
    x: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    standardize: bool,
    out: *mut *mut SpcrDataset,
) -> SpcrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let xm = matrix_from(x, n, p, "x")?;
        let yv = Vector::from_column_slice(matrix_from(y, n, 1, "y")?.as_slice());
        let inner = preprocess(&xm, &yv, standardize)?;
        *out = Box::into_raw(Box::new(SpcrDataset { inner }));
        Ok(SpcrStatus::Ok)
    })
}

/// # Safety
/// `ds` must be null or a handle from [`spcr_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spcr_dataset_free(ds: *mut SpcrDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Fits at the penalties in `cfg`. Returns `NotConverged` (with a valid
/// model in `out`) if the iteration cap was reached.
///
/// # Safety
/// `ds` and `cfg` must be valid pointers; `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn spcr_fit(
    ds: *const SpcrDataset,
    cfg: *const SpcrFitConfig,
    out: *mut *mut SpcrModel,
) -> SpcrStatus {
    guard(|| {
        if ds.is_null() || cfg.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let model = fit(&(*ds).inner, &FitConfig::from(&*cfg))?;
        Ok(wrap_model(model, out))
    })
}

/// K-fold cross-validation over the grid `grid_v × grid_beta`, then a refit
/// at the selected pair. The selected penalties are written to
/// `best_lambda_v` / `best_lambda_beta` when those are non-null.
///
/// # Safety
/// Grid pointers must reference `nv` and `nb` readable doubles; other
/// pointers as in [`spcr_fit`].
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn spcr_cross_validate(
    ds: *const SpcrDataset,
    cfg: *const SpcrFitConfig,
    folds: usize,
    grid_v: *const f64,
    nv: usize,
    grid_beta: *const f64,
    nb: usize,
    seed: u64,
    best_lambda_v: *mut f64,
    best_lambda_beta: *mut f64,
    out: *mut *mut SpcrModel,
) -> SpcrStatus {
    guard(|| {
        if ds.is_null() || cfg.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let d = &(*ds).inner;
        let gv = matrix_from(grid_v, nv, 1, "grid_v")?.as_slice().to_vec();
        let gb = matrix_from(grid_beta, nb, 1, "grid_beta")?.as_slice().to_vec();
        let plan = CvPlan::new(d.n(), folds, gv, gb, seed)?;
        let cv = cross_validate(d, &FitConfig::from(&*cfg), &plan)?;
        if !best_lambda_v.is_null() {
            *best_lambda_v = cv.best_lambda_v;
        }
        if !best_lambda_beta.is_null() {
            *best_lambda_beta = cv.best_lambda_beta;
        }
        Ok(wrap_model(cv.refit_model, out))
    })
}

/// Predicts for `n` raw rows `x` (n × p, row-major) into `out` (length n).
///
/// # Safety
/// `x` must reference `n * p` readable doubles and `out` `n` writable ones.
#[no_mangle]
pub unsafe extern "C" fn spcr_model_predict(
    model: *const SpcrModel,
    x: *const f64,
    n: usize,
    p: usize,
    out: *mut f64,
) -> SpcrStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let xm = matrix_from(x, n, p, "x")?;
        let pred = (*model).inner.model.predict(&xm)?;
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(pred.as_slice());
        Ok(SpcrStatus::Ok)
    })
}

/// Number of covariates `p` and components `k`.
///
/// # Safety
/// `model` must be a live handle; `p` and `k` may be null.
#[no_mangle]
pub unsafe extern "C" fn spcr_model_dims(model: *const SpcrModel, p: *mut usize, k: *mut usize) -> SpcrStatus {
    guard(|| {
        if model.is_null() {
            return Err(null("model"));
        }
        let m = &(*model).inner.model;
        if !p.is_null() {
            *p = m.p();
        }
        if !k.is_null() {
            *k = m.k();
        }
        Ok(SpcrStatus::Ok)
    })
}

/// Copies the per-covariate composite coefficients (on the preprocessed
/// scale) into `out`, which must hold `len == p` doubles.
///
/// # Safety
/// `out` must reference `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn spcr_model_coefficients(model: *const SpcrModel, out: *mut f64, len: usize) -> SpcrStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let c = &(*model).inner.model.composite_coefficients;
        if len != c.len() {
            return Err(Failure(
                SpcrStatus::DimensionMismatch,
                format!("buffer holds {len} values, model has {}", c.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(c.as_slice());
        Ok(SpcrStatus::Ok)
    })
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spcr_model_intercept(model: *const SpcrModel, out: *mut f64) -> SpcrStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        *out = (*model).inner.model.intercept;
        Ok(SpcrStatus::Ok)
    })
}

/// Writes 1 to `out` if the solver met its stopping rule, else 0.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spcr_model_converged(model: *const SpcrModel, out: *mut bool) -> SpcrStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        *out = (*model).inner.model.diagnostics.converged;
        Ok(SpcrStatus::Ok)
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn spcr_model_save(model: *const SpcrModel, path: *const c_char) -> SpcrStatus {
    guard(|| {
        if model.is_null() {
            return Err(null("model"));
        }
        save_model(&(*model).inner, &path_from(path)?)?;
        Ok(SpcrStatus::Ok)
    })
}

/// # Safety
/// `path` must be a NUL-terminated UTF-8 string and `out` a writable slot.
#[no_mangle]
pub unsafe extern "C" fn spcr_model_load(path: *const c_char, out: *mut *mut SpcrModel) -> SpcrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = load_model(&path_from(path)?)?;
        *out = Box::into_raw(Box::new(SpcrModel { inner }));
        Ok(SpcrStatus::Ok)
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spcr_model_free(model: *mut SpcrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
