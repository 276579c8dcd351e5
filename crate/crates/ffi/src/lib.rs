//! C ABI over the christoffel classifier.
//!
//! Models are opaque `CfModel` handles created by `cf_model_fit` or
//! `cf_model_load` and released with `cf_model_free`. Every fallible call
//! returns a `CfStatus`; on failure `cf_last_error_message` describes the
//! most recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use christoffel::cli::model_file;
use christoffel::{ClassifierModel, Error, ErrorKind, FitOptions, LabeledDataset, MassPolicy, Prediction};

/// Result codes. `CF_STATUS_OK` is zero; everything else is a failure.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Data = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

/// Fitted classifier. Opaque to C.
pub struct CfModel {
    inner: ClassifierModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> CfStatus {
    if matches!(e, Error::Io { .. }) {
        return CfStatus::Io;
    }
    match e.kind() {
        ErrorKind::Usage => CfStatus::InvalidArgument,
        ErrorKind::Data => CfStatus::Data,
        ErrorKind::Numerical => CfStatus::Numerical,
    }
}

fn fail(status: CfStatus, msg: impl Into<String>) -> CfStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), CfStatus>) -> CfStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CfStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(CfStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn check<T>(r: christoffel::Result<T>) -> Result<T, CfStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), CfStatus> {
    if p.is_null() {
        Err(fail(CfStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, CfStatus> {
    non_null(p, "path")?;
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(CfStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(Path::new(s))
}

unsafe fn model_arg<'a>(m: *const CfModel) -> Result<&'a ClassifierModel, CfStatus> {
    non_null(m, "model")?;
    Ok(&(*m).inner)
}

unsafe fn point_arg<'a>(model: &ClassifierModel, x: *const f64, n: usize) -> Result<&'a [f64], CfStatus> {
    non_null(x, "x")?;
    if n != model.dim() {
        return Err(fail(CfStatus::InvalidArgument, format!("point has {n} coordinates, model expects {}", model.dim())));
    }
    Ok(std::slice::from_raw_parts(x, n))
}

/// Fits a model on `count` points of dimension `n`.
///
/// `points` is row-major (`count * n` values); `labels` holds `count` labels
/// in `1..=classes`. `degree = 0` selects the degree automatically. When
/// `class_prior_weights` is nonzero each class gets mass `N_j / N`.
/// On success `*out` receives a new handle.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_model_fit(
    n: usize,
    points: *const f64,
    labels: *const u32,
    count: usize,
    classes: usize,
    degree: u32,
    class_prior_weights: i32,
    out: *mut *mut CfModel,
) -> CfStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        non_null(points, "points")?;
        non_null(labels, "labels")?;
        let total = count
            .checked_mul(n)
            .ok_or_else(|| fail(CfStatus::InvalidArgument, "count * n overflows"))?;
        let pts = std::slice::from_raw_parts(points, total).to_vec();
        let labs = std::slice::from_raw_parts(labels, count).iter().map(|&l| l as usize).collect();
        let ds = check(LabeledDataset::new(n, pts, labs, classes))?;
        let opts = FitOptions {
            degree: (degree > 0).then_some(degree),
            mass_policy: if class_prior_weights != 0 { MassPolicy::ClassPrior } else { MassPolicy::Normalized },
            ..FitOptions::default()
        };
        let inner = check(ClassifierModel::fit(&ds, &opts))?;
        *out = Box::into_raw(Box::new(CfModel { inner }));
        Ok(())
    })
}

/// Loads a model file written by `cf_model_save` or the command-line tool.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_model_load(path: *const c_char, out: *mut *mut CfModel) -> CfStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let inner = check(model_file::load(path_arg(path)?))?;
        *out = Box::into_raw(Box::new(CfModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cf_model_save(model: *const CfModel, path: *const c_char) -> CfStatus {
    guard(|| check(model_file::save(model_arg(model)?, path_arg(path)?)))
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cf_model_free(model: *mut CfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn cf_model_dim(model: *const CfModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn cf_model_num_classes(model: *const CfModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.classes())
}

/// Polynomial degree, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn cf_model_degree(model: *const CfModel) -> u32 {
    model.as_ref().map_or(0, |m| m.inner.degree())
}

/// Writes the per-class scores `Lambda_1(x) .. Lambda_m(x)` to `scores`,
/// which must hold `len >= m` values.
///
/// # Safety
/// `x` must hold `n` values and `scores` `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn cf_model_scores(
    model: *const CfModel,
    x: *const f64,
    n: usize,
    scores: *mut f64,
    len: usize,
) -> CfStatus {
    guard(|| {
        let model = model_arg(model)?;
        let x = point_arg(model, x, n)?;
        non_null(scores, "scores")?;
        if len < model.classes() {
            return Err(fail(CfStatus::InvalidArgument, format!("scores buffer holds {len}, need {}", model.classes())));
        }
        let s = check(model.scores(x))?;
        std::slice::from_raw_parts_mut(scores, s.len()).copy_from_slice(&s);
        Ok(())
    })
}

/// Writes the predicted class (1-based) to `label`, or 0 when the model
/// rejects the point.
///
/// # Safety
/// `x` must hold `n` values; `label` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_model_classify(model: *const CfModel, x: *const f64, n: usize, label: *mut u32) -> CfStatus {
    guard(|| {
        let model = model_arg(model)?;
        let x = point_arg(model, x, n)?;
        non_null(label, "label")?;
        *label = match check(model.classify(x))? {
            Prediction::Class(j) => j as u32,
            Prediction::Reject => 0,
        };
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null if the last
/// call succeeded. Valid until the next call into this library.
#[no_mangle]
pub extern "C" fn cf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn cf_status_message(status: CfStatus) -> *const c_char {
    let s: &'static CStr = match status {
        CfStatus::Ok => c"ok",
        CfStatus::NullPointer => c"null pointer argument",
        CfStatus::InvalidArgument => c"invalid argument",
        CfStatus::Data => c"invalid or inconsistent data",
        CfStatus::Numerical => c"numerical failure",
        CfStatus::Io => c"i/o error",
        CfStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}
