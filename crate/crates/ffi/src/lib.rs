//! C ABI over the `latprog` core.
//!
//! Objects cross the boundary as opaque handles created by `*_load` and
//! released by `*_free`. Every fallible call returns an [`LpStatus`]; the
//! message of the most recent failure on the calling thread is available
//! from [`lp_last_error`]. Panics are caught and reported as
//! `LP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use latprog::gan::{read_model, ToyGanParams};
use latprog::latent::{read_store, LatentDictionary, LatentVector};
use latprog::risk::{progression_risk, ProbabilityVector, GRADES};
use latprog::stats::{roc_auc, ScoredCohort};
use latprog::trajectory::{extrapolate, normalized_cosine_distance, NeighborIndex, PredictConfig, ScalingMode};
use latprog::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    DimensionMismatch = 5,
    InvalidArgument = 6,
    NotEnoughNeighbors = 7,
    /// Any other domain error; see `lp_last_error`.
    Domain = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Rescaling of neighbour displacements to the horizon.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpScaling {
    /// Factor `dt_i / horizon`.
    AsWritten = 0,
    /// Factor `horizon / dt_i`.
    LinearTime = 1,
}

/// Latent dictionary with its neighbour index.
pub struct LpDictionary {
    dict: LatentDictionary,
    index: NeighborIndex,
}

/// Toy generator parameters.
pub struct LpGan {
    params: ToyGanParams,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> LpStatus {
    match e {
        Error::Io(_) => LpStatus::Io,
        Error::Format { .. } => LpStatus::Format,
        Error::DimensionMismatch { .. } => LpStatus::DimensionMismatch,
        Error::InvalidArgument(_) => LpStatus::InvalidArgument,
        Error::NotEnoughNeighbors { .. } => LpStatus::NotEnoughNeighbors,
        _ => LpStatus::Domain,
    }
}

struct Fail(LpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), format!("{}: {e}", e.kind()))
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LpStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside latprog");
            LpStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(LpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Fail> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Fail(LpStatus::InvalidUtf8, "path is not UTF-8".into()))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, needed: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len < needed {
        return Err(Fail(LpStatus::BufferTooSmall, format!("{what} holds {len}, needs {needed}")));
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn lp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a latent store. On success `*out` owns a handle for `lp_dictionary_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lp_dictionary_load(path: *const c_char, out: *mut *mut LpDictionary) -> LpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(path)?;
        let file = std::fs::File::open(&path).map_err(Error::from)?;
        let dict = read_store(std::io::BufReader::new(file))?;
        let index = NeighborIndex::new(&dict)?;
        *out = Box::into_raw(Box::new(LpDictionary { dict, index }));
        Ok(())
    })
}

/// # Safety
/// `dict` must come from `lp_dictionary_load` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lp_dictionary_free(dict: *mut LpDictionary) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}

/// Number of stored visits, or 0 for a null handle.
///
/// # Safety
/// `dict` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lp_dictionary_len(dict: *const LpDictionary) -> usize {
    dict.as_ref().map_or(0, |d| d.dict.len())
}

/// Latent dimension, or 0 for a null handle.
///
/// # Safety
/// `dict` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lp_dictionary_dimension(dict: *const LpDictionary) -> usize {
    dict.as_ref().map_or(0, |d| d.dict.dimension())
}

/// Moves `query` (length `dim`) along the mean displacement of its `m`
/// nearest neighbours rescaled to `horizon_months`, writing `dim` values to
/// `out_w`.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out_len` is the capacity of `out_w`.
#[no_mangle]
pub unsafe extern "C" fn lp_extrapolate(
    dict: *const LpDictionary,
    query: *const f64,
    dim: usize,
    m: usize,
    horizon_months: i64,
    scaling: LpScaling,
    out_w: *mut f64,
    out_len: usize,
) -> LpStatus {
    guard(|| {
        let d = dict.as_ref().ok_or_else(|| null("dict"))?;
        let q = LatentVector::new(slice_arg(query, dim, "query")?.to_vec())?;
        let out = out_slice(out_w, out_len, dim, "out_w")?;
        let cfg = PredictConfig {
            neighbors: m,
            horizon_months,
            scaling: match scaling {
                LpScaling::AsWritten => ScalingMode::AsWritten,
                LpScaling::LinearTime => ScalingMode::LinearTime,
            },
            ..PredictConfig::default()
        };
        let res = extrapolate(&d.index, &q, None, &cfg)?;
        out.copy_from_slice(res.predicted_w.as_slice());
        Ok(())
    })
}

/// Distance between the unit-normalized vectors `a` and `b`.
///
/// # Safety
/// `a` and `b` must hold `dim` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lp_normalized_cosine_distance(a: *const f64, b: *const f64, dim: usize, out: *mut f64) -> LpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let a = LatentVector::new(slice_arg(a, dim, "a")?.to_vec())?;
        let b = LatentVector::new(slice_arg(b, dim, "b")?.to_vec())?;
        *out = normalized_cosine_distance(&a, &b)?;
        Ok(())
    })
}

/// Progress and stable probabilities from baseline and follow-up grade
/// distributions of five values each.
///
/// # Safety
/// `p_baseline` and `p_followup` must hold five values; outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn lp_progression_risk(
    p_baseline: *const f64,
    p_followup: *const f64,
    out_progress: *mut f64,
    out_stable: *mut f64,
) -> LpStatus {
    guard(|| {
        let progress = out_arg(out_progress, "out_progress")?;
        let stable = out_arg(out_stable, "out_stable")?;
        let pi = ProbabilityVector::new(slice_arg(p_baseline, GRADES, "p_baseline")?)?;
        let pj = ProbabilityVector::new(slice_arg(p_followup, GRADES, "p_followup")?)?;
        let r = progression_risk(&pi, &pj);
        *progress = r.p_progress;
        *stable = r.p_stable;
        Ok(())
    })
}

/// Area under the ROC curve; `labels` are 0 or non-zero.
///
/// # Safety
/// `scores` and `labels` must hold `n` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lp_roc_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> LpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let scores = slice_arg(scores, n, "scores")?.to_vec();
        let labels = slice_arg(labels, n, "labels")?.iter().map(|&l| l != 0).collect();
        *out = roc_auc(&ScoredCohort::new(scores, labels)?)?;
        Ok(())
    })
}

/// Loads a model file. On success `*out` owns a handle for `lp_gan_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lp_gan_load(path: *const c_char, out: *mut *mut LpGan) -> LpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let params = read_model(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(LpGan { params }));
        Ok(())
    })
}

/// # Safety
/// `gan` must come from `lp_gan_load` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lp_gan_free(gan: *mut LpGan) {
    if !gan.is_null() {
        drop(Box::from_raw(gan));
    }
}

/// Latent dimension, or 0 for a null handle.
///
/// # Safety
/// `gan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lp_gan_latent_dim(gan: *const LpGan) -> usize {
    gan.as_ref().map_or(0, |g| g.params.latent_dim())
}

/// Side length of generated images, or 0 for a null handle.
///
/// # Safety
/// `gan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lp_gan_image_size(gan: *const LpGan) -> usize {
    gan.as_ref().map_or(0, |g| g.params.image_size())
}

/// Renders latent `w` with all noise maps at zero into `out_pixels`
/// (row-major, values in [0, 1]).
///
/// # Safety
/// `w` must hold `dim` values and `out_pixels` `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn lp_gan_generate(
    gan: *const LpGan,
    w: *const f64,
    dim: usize,
    out_pixels: *mut f64,
    out_len: usize,
) -> LpStatus {
    guard(|| {
        let g = gan.as_ref().ok_or_else(|| null("gan"))?;
        let s = g.params.image_size();
        let out = out_slice(out_pixels, out_len, s * s, "out_pixels")?;
        let img = g.params.synthesize(slice_arg(w, dim, "w")?, Some(&g.params.zero_noise()))?;
        out.copy_from_slice(img.pixels());
        Ok(())
    })
}
