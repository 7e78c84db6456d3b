//! C ABI over `bvmlab`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` style
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`BvmStatus`]; on failure a message for the calling thread is
//! available from [`bvm_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use bvmlab::experiments::{emit_report, run_experiment, ExperimentConfig, ExperimentError, ExperimentOutput};
use bvmlab::stats::{tv_distance, tv_to_law, GaussianLaw, GridDensity, Law};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BvmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    DiagnosticsFailure = 4,
    IoError = 5,
    /// The output buffer was too small; the required size was written.
    BufferTooSmall = 6,
    Internal = 7,
}

/// Tabulated univariate density.
pub struct BvmDensity(GridDensity);

/// Validated experiment configuration.
pub struct BvmConfig(ExperimentConfig);

/// Result of a finished experiment.
pub struct BvmOutput(ExperimentOutput);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: BvmStatus, msg: impl Into<String>) -> BvmStatus {
    set_error(msg);
    status
}

fn experiment_status(e: &ExperimentError) -> BvmStatus {
    match e.exit_code() {
        2 => BvmStatus::ConfigError,
        3 => BvmStatus::DiagnosticsFailure,
        _ if matches!(e, ExperimentError::Io { .. }) => BvmStatus::IoError,
        _ => BvmStatus::Internal,
    }
}

/// Runs `f`, turning panics into [`BvmStatus::Internal`].
fn guard(f: impl FnOnce() -> BvmStatus) -> BvmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == BvmStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(_) => fail(BvmStatus::Internal, "internal panic"),
    }
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, BvmStatus> {
    if p.is_null() {
        return Err(fail(BvmStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(BvmStatus::InvalidArgument, "string is not valid UTF-8"))
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], BvmStatus> {
    if p.is_null() {
        return Err(fail(BvmStatus::NullPointer, "null array argument"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! deref {
    ($p:expr) => {{
        if $p.is_null() {
            return fail(BvmStatus::NullPointer, "null handle");
        }
        &*$p
    }};
}

/// Message describing the last failure on this thread, or null. The pointer
/// stays valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn bvm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bvm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a density from `len` grid nodes and nonnegative values, which are
/// renormalized to unit mass.
///
/// # Safety
/// `grid` and `values` must point to `len` readable doubles and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn bvm_density_new(
    grid: *const f64,
    values: *const f64,
    len: usize,
    out: *mut *mut BvmDensity,
) -> BvmStatus {
    guard(|| {
        if out.is_null() {
            return fail(BvmStatus::NullPointer, "null output slot");
        }
        let g = try_status!(slice(grid, len));
        let v = try_status!(slice(values, len));
        match GridDensity::new(g.to_vec(), v.to_vec()) {
            Ok(d) => {
                *out = Box::into_raw(Box::new(BvmDensity(d)));
                BvmStatus::Ok
            }
            Err(e) => fail(BvmStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Releases a density. Null is ignored.
///
/// # Safety
/// `d` must be null or a handle from [`bvm_density_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bvm_density_free(d: *mut BvmDensity) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Mean and variance of a density.
///
/// # Safety
/// `d` must be a live handle; `mean` and `variance` writable.
#[no_mangle]
pub unsafe extern "C" fn bvm_density_moments(d: *const BvmDensity, mean: *mut f64, variance: *mut f64) -> BvmStatus {
    guard(|| {
        let d = deref!(d);
        if mean.is_null() || variance.is_null() {
            return fail(BvmStatus::NullPointer, "null output");
        }
        *mean = d.0.mean();
        *variance = d.0.variance();
        BvmStatus::Ok
    })
}

/// Quantile at probability `p ∈ [0, 1]`.
///
/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bvm_density_quantile(d: *const BvmDensity, p: f64, out: *mut f64) -> BvmStatus {
    guard(|| {
        let d = deref!(d);
        if out.is_null() {
            return fail(BvmStatus::NullPointer, "null output");
        }
        if !(0.0..=1.0).contains(&p) {
            return fail(BvmStatus::InvalidArgument, format!("probability {p} outside [0, 1]"));
        }
        *out = d.0.quantile(p);
        BvmStatus::Ok
    })
}

/// Total variation distance between two densities.
///
/// # Safety
/// `p` and `q` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bvm_density_tv(p: *const BvmDensity, q: *const BvmDensity, out: *mut f64) -> BvmStatus {
    guard(|| {
        let (p, q) = (deref!(p), deref!(q));
        if out.is_null() {
            return fail(BvmStatus::NullPointer, "null output");
        }
        *out = tv_distance(&p.0, &q.0);
        BvmStatus::Ok
    })
}

/// Total variation distance from a density to `N(mean, variance)`.
///
/// # Safety
/// `d` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bvm_density_tv_normal(
    d: *const BvmDensity,
    mean: f64,
    variance: f64,
    out: *mut f64,
) -> BvmStatus {
    guard(|| {
        let d = deref!(d);
        if out.is_null() {
            return fail(BvmStatus::NullPointer, "null output");
        }
        let law = match GaussianLaw::univariate(mean, variance) {
            Ok(g) => Law::from(g),
            Err(e) => return fail(BvmStatus::InvalidArgument, e.to_string()),
        };
        match tv_to_law(&d.0, &law) {
            Ok(v) => {
                *out = v;
                BvmStatus::Ok
            }
            Err(e) => fail(BvmStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Parses and validates an experiment config from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn bvm_config_from_json(json: *const c_char, out: *mut *mut BvmConfig) -> BvmStatus {
    guard(|| {
        if out.is_null() {
            return fail(BvmStatus::NullPointer, "null output slot");
        }
        let text = try_status!(c_str(json));
        match ExperimentConfig::from_json_str(text) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(BvmConfig(c)));
                BvmStatus::Ok
            }
            Err(e) => fail(experiment_status(&e), e.to_string()),
        }
    })
}

/// Replaces the master seed.
///
/// # Safety
/// `c` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bvm_config_set_seed(c: *mut BvmConfig, seed: u64) -> BvmStatus {
    guard(|| {
        if c.is_null() {
            return fail(BvmStatus::NullPointer, "null handle");
        }
        (*c).0.seed = seed;
        BvmStatus::Ok
    })
}

/// Releases a config. Null is ignored.
///
/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bvm_config_free(c: *mut BvmConfig) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Runs the configured experiment on up to `jobs` threads (0 means all
/// cores).
///
/// # Safety
/// `c` must be a live handle and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn bvm_run(c: *const BvmConfig, jobs: usize, out: *mut *mut BvmOutput) -> BvmStatus {
    guard(|| {
        let c = deref!(c);
        if out.is_null() {
            return fail(BvmStatus::NullPointer, "null output slot");
        }
        match run_experiment(&c.0, (jobs > 0).then_some(jobs)) {
            Ok(o) => {
                *out = Box::into_raw(Box::new(BvmOutput(o)));
                BvmStatus::Ok
            }
            Err(e) => fail(experiment_status(&e), e.to_string()),
        }
    })
}

/// Number of report rows.
///
/// # Safety
/// `o` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bvm_output_rows(o: *const BvmOutput, out: *mut usize) -> BvmStatus {
    guard(|| {
        let o = deref!(o);
        if out.is_null() {
            return fail(BvmStatus::NullPointer, "null output");
        }
        *out = o.0.report.len();
        BvmStatus::Ok
    })
}

fn copy_out(text: &str, buf: *mut c_char, cap: usize, needed: *mut usize) -> BvmStatus {
    let bytes = text.as_bytes();
    if !needed.is_null() {
        unsafe { *needed = bytes.len() + 1 };
    }
    if buf.is_null() || cap < bytes.len() + 1 {
        return fail(BvmStatus::BufferTooSmall, format!("need {} bytes", bytes.len() + 1));
    }
    unsafe {
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), bytes.len());
        *buf.add(bytes.len()) = 0;
    }
    BvmStatus::Ok
}

/// Copies the report as CSV into `buf`. `needed` (optional) receives the
/// size including the terminating NUL; pass a null `buf` to query it.
///
/// # Safety
/// `o` must be a live handle; `buf` must have `cap` writable bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn bvm_output_csv(o: *const BvmOutput, buf: *mut c_char, cap: usize, needed: *mut usize) -> BvmStatus {
    guard(|| {
        let o = deref!(o);
        let mut bytes = Vec::new();
        if let Err(e) = o.0.report.write_csv(&mut bytes) {
            return fail(BvmStatus::Internal, e.to_string());
        }
        copy_out(&String::from_utf8_lossy(&bytes), buf, cap, needed)
    })
}

/// Copies the JSON summary (medians and quartiles) into `buf`, as
/// [`bvm_output_csv`].
///
/// # Safety
/// As [`bvm_output_csv`].
#[no_mangle]
pub unsafe extern "C" fn bvm_output_summary_json(
    o: *const BvmOutput,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> BvmStatus {
    guard(|| {
        let o = deref!(o);
        copy_out(&o.0.summary_json().to_string(), buf, cap, needed)
    })
}

/// Writes `report.csv`, `report.json` and one SVG per figure in `figures/` under `dir`.
///
/// # Safety
/// `o` must be a live handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn bvm_output_write(o: *const BvmOutput, dir: *const c_char) -> BvmStatus {
    guard(|| {
        let o = deref!(o);
        let dir = try_status!(c_str(dir));
        match emit_report(&o.0, Path::new(dir)) {
            Ok(()) => BvmStatus::Ok,
            Err(e) => fail(BvmStatus::IoError, e.to_string()),
        }
    })
}

/// Releases an output. Null is ignored.
///
/// # Safety
/// `o` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bvm_output_free(o: *mut BvmOutput) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}
