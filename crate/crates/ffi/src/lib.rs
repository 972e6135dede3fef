//! C ABI for predlab.
//!
//! Models and paths are opaque heap handles owned by the caller and released
//! with the matching `_free` function. Every fallible call returns a
//! [`PredlabStatus`]; on failure the message is kept per thread and can be
//! read with [`predlab_last_error`]. Output pointers are written only on
//! success. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use predlab::harness::{self, ExperimentConfig};
use predlab::measure::{bl_distance, suite_function, DiscreteMeasure, Point};
use predlab::predictive::{closed_form_predictive, enumerate_predictive};
use predlab::processes::{sample_path, ModelKind, PathSample, ProcessModel};
use predlab::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    SpaceMismatch = 4,
    BudgetExceeded = 5,
    NullConditioning = 6,
    Unsupported = 7,
    Config = 8,
    Io = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// A validated process model.
pub struct PredlabModel {
    inner: ProcessModel,
}

/// A sampled path of a model.
pub struct PredlabPath {
    inner: PathSample,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PredlabStatus {
    match e {
        Error::InvalidArgument(_) => PredlabStatus::InvalidArgument,
        Error::Domain(_) => PredlabStatus::Domain,
        Error::SpaceMismatch(_) => PredlabStatus::SpaceMismatch,
        Error::BudgetExceeded(_) => PredlabStatus::BudgetExceeded,
        Error::NullConditioning(_) => PredlabStatus::NullConditioning,
        Error::Unsupported(_) => PredlabStatus::Unsupported,
        Error::Config(_) => PredlabStatus::Config,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => PredlabStatus::Io,
    }
}

struct Failure(PredlabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PredlabStatus::NullPointer, format!("{what} is null"))
}

/// Run `body`, translating errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> PredlabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PredlabStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            PredlabStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(PredlabStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn model_ref<'a>(m: *const PredlabModel) -> Result<&'a ProcessModel, Failure> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// `count` points of dimension `dim`, row-major.
fn points(coords: &[f64], dim: usize, count: usize) -> Result<Vec<Point>, Failure> {
    if dim == 0 || coords.len() != dim * count {
        return Err(Failure(PredlabStatus::InvalidArgument, format!("expected {count} points of dimension {dim}")));
    }
    coords.chunks(dim).map(|c| Point::new(c).map_err(Failure::from)).collect()
}

fn out<T>(p: *mut T, value: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null("output pointer"));
    }
    unsafe { p.write(value) };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn predlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or an empty string. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn predlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Build the default model of a registered scenario.
///
/// # Safety
/// `scenario` must be a NUL-terminated string; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn predlab_model_from_scenario(scenario: *const c_char, out_model: *mut *mut PredlabModel) -> PredlabStatus {
    guard(|| {
        let id = text(scenario, "scenario")?;
        let sc = harness::find_scenario(id)?;
        let model = ProcessModel::new(sc.id, sc.model)?;
        out(out_model, Box::into_raw(Box::new(PredlabModel { inner: model })))
    })
}

/// Build a model from the JSON form of its parameters, e.g.
/// `{"kind":"sine_pair"}`.
///
/// # Safety
/// `id` and `json` must be NUL-terminated strings; `out_model` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn predlab_model_from_json(id: *const c_char, json: *const c_char, out_model: *mut *mut PredlabModel) -> PredlabStatus {
    guard(|| {
        let id = text(id, "id")?;
        let kind: ModelKind = serde_json::from_str(text(json, "json")?).map_err(|e| Failure(PredlabStatus::InvalidArgument, e.to_string()))?;
        let model = ProcessModel::new(id, kind)?;
        out(out_model, Box::into_raw(Box::new(PredlabModel { inner: model })))
    })
}

/// Release a model. Null is ignored.
///
/// # Safety
/// `model` must come from a constructor above and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn predlab_model_free(model: *mut PredlabModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Dimension of the model's points.
///
/// # Safety
/// `model` must be a live handle; `out_dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn predlab_model_point_dim(model: *const PredlabModel, out_dim: *mut usize) -> PredlabStatus {
    guard(|| out(out_dim, model_ref(model)?.space.dim()))
}

/// Sample the first `n` points of the model from `seed`.
///
/// # Safety
/// `model` must be a live handle; `out_path` must be writable.
#[no_mangle]
pub unsafe extern "C" fn predlab_sample_path(model: *const PredlabModel, n: usize, seed: u64, out_path: *mut *mut PredlabPath) -> PredlabStatus {
    guard(|| {
        let path = sample_path(model_ref(model)?, n, seed)?;
        out(out_path, Box::into_raw(Box::new(PredlabPath { inner: path })))
    })
}

/// Release a path. Null is ignored.
///
/// # Safety
/// `path` must come from [`predlab_sample_path`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn predlab_path_free(path: *mut PredlabPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Number of points in a path.
///
/// # Safety
/// `path` must be a live handle; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn predlab_path_len(path: *const PredlabPath, out_len: *mut usize) -> PredlabStatus {
    guard(|| out(out_len, path.as_ref().ok_or_else(|| null("path"))?.inner.len()))
}

/// Copy the path's coordinates, row-major, into `buf`. `out_written`
/// receives the number of values needed; if `capacity` is smaller nothing
/// is copied and `BufferTooSmall` is returned.
///
/// # Safety
/// `buf` must hold `capacity` values; `out_written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn predlab_path_values(path: *const PredlabPath, buf: *mut f64, capacity: usize, out_written: *mut usize) -> PredlabStatus {
    guard(|| {
        let p = &path.as_ref().ok_or_else(|| null("path"))?.inner;
        let flat: Vec<f64> = p.values.iter().flat_map(|x| x.coords().iter().copied()).collect();
        out(out_written, flat.len())?;
        if capacity < flat.len() {
            return Err(Failure(PredlabStatus::BufferTooSmall, format!("need {} values, have {capacity}", flat.len())));
        }
        if !flat.is_empty() {
            if buf.is_null() {
                return Err(null("buf"));
            }
            ptr::copy_nonoverlapping(flat.as_ptr(), buf, flat.len());
        }
        Ok(())
    })
}

/// Exact `E{f(X_{n+1}) | X_1..X_n}` after a prefix of `n_points` points,
/// by enumeration. `f_id` names a function of the standard suite.
///
/// # Safety
/// `prefix` must hold `n_points * dim` values; `f_id` must be a
/// NUL-terminated string; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn predlab_enumerate_predictive(
    model: *const PredlabModel,
    prefix: *const f64,
    n_points: usize,
    f_id: *const c_char,
    out_value: *mut f64,
) -> PredlabStatus {
    guard(|| {
        let m = model_ref(model)?;
        let dim = m.space.dim();
        let pts = points(slice(prefix, n_points * dim, "prefix")?, dim, n_points)?;
        let f = suite_function(&m.space, text(f_id, "f_id")?)?;
        out(out_value, enumerate_predictive(m, &pts, &f)?.value)
    })
}

/// `E{f(X_{n+1}) | F_n}` along a sampled path, by the model's closed form or
/// filter.
///
/// # Safety
/// `model` and `path` must be live handles; `f_id` must be a NUL-terminated
/// string; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn predlab_closed_form_predictive(
    model: *const PredlabModel,
    path: *const PredlabPath,
    n: usize,
    f_id: *const c_char,
    out_value: *mut f64,
) -> PredlabStatus {
    guard(|| {
        let m = model_ref(model)?;
        let p = &path.as_ref().ok_or_else(|| null("path"))?.inner;
        let f = suite_function(&m.space, text(f_id, "f_id")?)?;
        out(out_value, closed_form_predictive(m, p, n, &f)?.value)
    })
}

/// Bounded Lipschitz distance between two discrete measures on the model's
/// state space. Atoms are row-major; weights must sum to one.
///
/// # Safety
/// Each atom array must hold `len * dim` values and each weight array
/// `len`; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn predlab_bl_distance(
    model: *const PredlabModel,
    p_atoms: *const f64,
    p_weights: *const f64,
    p_len: usize,
    q_atoms: *const f64,
    q_weights: *const f64,
    q_len: usize,
    out_value: *mut f64,
) -> PredlabStatus {
    guard(|| {
        let m = model_ref(model)?;
        let dim = m.space.dim();
        let measure = |atoms: *const f64, weights: *const f64, len: usize| -> Result<DiscreteMeasure, Failure> {
            let pts = points(slice(atoms, len * dim, "atoms")?, dim, len)?;
            Ok(DiscreteMeasure::new(m.space.clone(), pts, slice(weights, len, "weights")?.to_vec())?)
        };
        let p = measure(p_atoms, p_weights, p_len)?;
        let q = measure(q_atoms, q_weights, q_len)?;
        out(out_value, bl_distance(&p, &q)?)
    })
}

/// Run a scenario's battery. `paths == 0` keeps the scenario default;
/// `threads == 0` uses all cores; a null `out_dir` writes nothing.
/// `out_passed` receives 1 if every predicted verdict was observed.
///
/// # Safety
/// `scenario` must be a NUL-terminated string, `out_dir` null or one;
/// `out_passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn predlab_run_scenario(
    scenario: *const c_char,
    seed: u64,
    paths: usize,
    threads: usize,
    out_dir: *const c_char,
    out_passed: *mut c_int,
) -> PredlabStatus {
    guard(|| {
        let mut cfg = ExperimentConfig::for_scenario(text(scenario, "scenario")?);
        cfg.seed = seed;
        cfg.paths = (paths > 0).then_some(paths);
        let record = harness::execute(&cfg, (threads > 0).then_some(threads))?;
        if !out_dir.is_null() {
            harness::write_outputs(&record, &PathBuf::from(text(out_dir, "out_dir")?))?;
        }
        out(out_passed, c_int::from(record.passed))
    })
}
