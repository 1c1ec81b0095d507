//! C ABI over the `dirmusic` library.
//!
//! Objects are opaque heap handles released with the matching `_free`
//! function. Every fallible call returns a `DmStatus`; on failure a message is
//! kept per thread and can be fetched with `dm_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dirmusic::error::Error;
use dirmusic::estimator::DoaEstimator;
use dirmusic::manifold::{angle_grid, steering_vector, ArrayConfig};
use dirmusic::pattern::GaussianMixturePattern;
use dirmusic::signal::SnapshotMatrix;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Domain = 3,
    NoPulse = 4,
    Io = 5,
    Parse = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Antenna gain pattern.
pub struct DmPattern(GaussianMixturePattern);

/// Array geometry (element boresight offsets).
pub struct DmArray(ArrayConfig);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DmStatus {
    match e {
        Error::InvalidInput(_) => DmStatus::InvalidInput,
        Error::Domain(_) => DmStatus::Domain,
        Error::NoPulseFound { .. } => DmStatus::NoPulse,
        Error::Io { .. } => DmStatus::Io,
        Error::Parse { .. } => DmStatus::Parse,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (DmStatus, String)>) -> DmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DmStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DmStatus::Panic
        }
    }
}

fn core(e: Error) -> (DmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (DmStatus, String) {
    (DmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], (DmStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, (DmStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), (DmStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Row-major `n_channels x n_samples` block.
unsafe fn snapshots(x: *const f64, n_channels: usize, n_samples: usize) -> Result<SnapshotMatrix, (DmStatus, String)> {
    let len = n_channels
        .checked_mul(n_samples)
        .ok_or_else(|| (DmStatus::InvalidInput, "snapshot size overflows".to_string()))?;
    let data = slice(x, len, "x")?;
    SnapshotMatrix::new(DMatrix::from_row_slice(n_channels, n_samples, data)).map_err(core)
}

/// Copy the last error message on this thread into a new string, or return
/// null if the last call succeeded. Release with `dm_string_free`.
#[no_mangle]
pub extern "C" fn dm_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn dm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_pattern_reference(out: *mut *mut DmPattern) -> DmStatus {
    guard(|| {
        let h = Box::into_raw(Box::new(DmPattern(GaussianMixturePattern::reference())));
        put(out, h, "out")
    })
}

/// Build a pattern from `[a1, b1, c1, a2, b2, c2, ...]`.
///
/// # Safety
/// `params` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_pattern_new(params: *const f64, len: usize, out: *mut *mut DmPattern) -> DmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = GaussianMixturePattern::from_params(slice(params, len, "params")?).map_err(core)?;
        put(out, Box::into_raw(Box::new(DmPattern(p))), "out")
    })
}

/// # Safety
/// `p` must come from a `dm_pattern_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn dm_pattern_free(p: *mut DmPattern) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live pattern; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_pattern_gain(p: *const DmPattern, theta_deg: f64, out: *mut f64) -> DmStatus {
    guard(|| {
        let g = get(p, "pattern")?.0.gain(theta_deg).map_err(core)?;
        put(out, g, "out")
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_array_uniform(n_elements: usize, out: *mut *mut DmArray) -> DmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = ArrayConfig::uniform(n_elements).map_err(core)?;
        put(out, Box::into_raw(Box::new(DmArray(a))), "out")
    })
}

/// Offsets in degrees, strictly increasing in `[0, 360)`.
///
/// # Safety
/// `offsets_deg` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_array_with_offsets(offsets_deg: *const f64, len: usize, out: *mut *mut DmArray) -> DmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = ArrayConfig::with_offsets(slice(offsets_deg, len, "offsets_deg")?.to_vec()).map_err(core)?;
        put(out, Box::into_raw(Box::new(DmArray(a))), "out")
    })
}

/// # Safety
/// `a` must be a live array; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_array_n_elements(a: *const DmArray, out: *mut usize) -> DmStatus {
    guard(|| put(out, get(a, "array")?.0.n_elements(), "out"))
}

/// # Safety
/// `a` must come from a `dm_array_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn dm_array_free(a: *mut DmArray) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Write the `n_elements` gains at `theta_deg` into `out`.
///
/// # Safety
/// Handles must be live; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dm_steering_vector(
    p: *const DmPattern,
    a: *const DmArray,
    theta_deg: f64,
    out: *mut f64,
    out_len: usize,
) -> DmStatus {
    guard(|| {
        let g = steering_vector(&get(p, "pattern")?.0, &get(a, "array")?.0, theta_deg).map_err(core)?;
        if out_len < g.len() {
            return Err((DmStatus::BufferTooSmall, format!("need {} doubles, got {out_len}", g.len())));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(g.as_slice().as_ptr(), out, g.len());
        Ok(())
    })
}

/// Estimate the arrival direction from a row-major `n_channels x n_samples`
/// snapshot block searched on a `grid_step_deg` grid.
///
/// # Safety
/// Handles must be live; `x` must hold `n_channels * n_samples` doubles;
/// outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_estimate_doa(
    p: *const DmPattern,
    a: *const DmArray,
    x: *const f64,
    n_channels: usize,
    n_samples: usize,
    grid_step_deg: f64,
    theta_out: *mut f64,
    peak_out: *mut f64,
) -> DmStatus {
    guard(|| {
        let est = estimator(p, a, grid_step_deg)?;
        let e = est.estimate(&snapshots(x, n_channels, n_samples)?).map_err(core)?;
        put(theta_out, e.theta_deg, "theta_out")?;
        if !peak_out.is_null() {
            peak_out.write(e.peak_value);
        }
        Ok(())
    })
}

/// Spatial spectrum on the grid `0, step, 2*step, ...` below 360. The grid
/// size is stored in `written`; if `out_len` is too small nothing else is
/// written and `DM_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// As for `dm_estimate_doa`; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dm_spatial_spectrum(
    p: *const DmPattern,
    a: *const DmArray,
    x: *const f64,
    n_channels: usize,
    n_samples: usize,
    grid_step_deg: f64,
    out: *mut f64,
    out_len: usize,
    written: *mut usize,
) -> DmStatus {
    guard(|| {
        let est = estimator(p, a, grid_step_deg)?;
        let need = est.grid_deg().len();
        put(written, need, "written")?;
        if out_len < need {
            return Err((DmStatus::BufferTooSmall, format!("need {need} doubles, got {out_len}")));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let s = est.spectrum(&snapshots(x, n_channels, n_samples)?).map_err(core)?;
        ptr::copy_nonoverlapping(s.values.as_ptr(), out, need);
        Ok(())
    })
}

unsafe fn estimator(p: *const DmPattern, a: *const DmArray, step: f64) -> Result<DoaEstimator, (DmStatus, String)> {
    let pattern = get(p, "pattern")?.0.clone();
    let array = get(a, "array")?.0.clone();
    let grid = angle_grid(step).map_err(core)?;
    DoaEstimator::new(pattern, array, grid).map_err(core)
}
