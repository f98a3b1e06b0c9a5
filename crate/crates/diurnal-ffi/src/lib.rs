//! C ABI over the core library: opaque model handles, status codes, and a
//! thread-local last-error message.
//!
//! Conventions:
//! * every fallible call returns a [`DiurnalStatus`]; `DIURNAL_STATUS_OK`
//!   is zero,
//! * on failure, `diurnal_last_error_message()` returns a description valid
//!   until the next failing call on the same thread,
//! * handles returned through out-pointers are owned by the caller and must
//!   be released with `diurnal_model_free`,
//! * array arguments are plain `double` buffers with explicit lengths.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use diurnal::error::Error;
use diurnal::pca::{self, DayCoefficients, PcaBasis};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiurnalStatus {
    Ok = 0,
    /// Bad arguments or configuration.
    UsageError = 1,
    /// Bad or insufficient data (unreadable file, malformed model, ...).
    DataError = 2,
    /// A required pointer was null.
    NullPointer = 3,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 4,
    /// The library panicked; state is still consistent.
    Panic = 5,
}

/// Opaque handle to a loaded per-modality basis.
pub struct DiurnalModel {
    basis: PcaBasis,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(err: &Error) -> DiurnalStatus {
    set_error(&err.to_string());
    match err.exit_code() {
        1 => DiurnalStatus::UsageError,
        _ => DiurnalStatus::DataError,
    }
}

fn guard<F: FnOnce() -> DiurnalStatus>(f: F) -> DiurnalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            DiurnalStatus::Panic
        }
    }
}

/// Returns the message of the most recent failure on this thread.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn diurnal_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn read_utf8<'a>(ptr: *const c_char) -> Result<&'a str, DiurnalStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(DiurnalStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        DiurnalStatus::InvalidUtf8
    })
}

unsafe fn install_model(
    out: *mut *mut DiurnalModel,
    basis: PcaBasis,
) -> DiurnalStatus {
    *out = Box::into_raw(Box::new(DiurnalModel { basis }));
    DiurnalStatus::Ok
}

/// Loads a model JSON file into a new handle.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn diurnal_model_load(
    path: *const c_char,
    out: *mut *mut DiurnalModel,
) -> DiurnalStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out pointer");
            return DiurnalStatus::NullPointer;
        }
        let path = match read_utf8(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match PcaBasis::load_json(Path::new(path)) {
            Ok((basis, _)) => install_model(out, basis),
            Err(e) => fail(&e),
        }
    })
}

/// Parses a model from a JSON document held in memory.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn diurnal_model_from_json(
    json: *const c_char,
    out: *mut *mut DiurnalModel,
) -> DiurnalStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out pointer");
            return DiurnalStatus::NullPointer;
        }
        let json = match read_utf8(json) {
            Ok(j) => j,
            Err(status) => return status,
        };
        match PcaBasis::from_json_str(json) {
            Ok((basis, _)) => install_model(out, basis),
            Err(e) => fail(&e),
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must have come from a `diurnal_model_*` constructor and must not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn diurnal_model_free(model: *mut DiurnalModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of slots per day vector (the basis dimension). Zero for null.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn diurnal_model_dim(model: *const DiurnalModel) -> usize {
    if model.is_null() {
        0
    } else {
        (*model).basis.dim
    }
}

/// Share of variance captured by the first `k` components.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn diurnal_model_variance_explained(
    model: *const DiurnalModel,
    k: usize,
    out: *mut f64,
) -> DiurnalStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            set_error("null pointer");
            return DiurnalStatus::NullPointer;
        }
        let basis = &(*model).basis;
        if k == 0 || k > basis.dim {
            set_error("k must be in 1..=dim");
            return DiurnalStatus::UsageError;
        }
        *out = pca::variance_explained(basis, k);
        DiurnalStatus::Ok
    })
}

/// Expands one raw day (slot means in original units) over the basis.
///
/// Writes `k` coefficients to `coeffs_out` and, through any non-null
/// optional pointers, the subtracted daily mean, the divided-out RMS and
/// the RMS residual norm of the truncated expansion.
///
/// # Safety
/// `slots` must point to `len` doubles and `coeffs_out` to `k` doubles;
/// the optional out-pointers must each be valid or null.
#[no_mangle]
pub unsafe extern "C" fn diurnal_model_expand_day(
    model: *const DiurnalModel,
    slots: *const f64,
    len: usize,
    k: usize,
    coeffs_out: *mut f64,
    mean_out: *mut f64,
    rms_out: *mut f64,
    residual_out: *mut f64,
) -> DiurnalStatus {
    guard(|| {
        if model.is_null() || slots.is_null() || coeffs_out.is_null() {
            set_error("null pointer");
            return DiurnalStatus::NullPointer;
        }
        let basis = &(*model).basis;
        if len != basis.dim {
            return fail(&Error::DimensionMismatch {
                expected: basis.dim,
                got: len,
            });
        }
        let raw = std::slice::from_raw_parts(slots, len);
        if raw.iter().any(|v| !v.is_finite()) {
            set_error("slot values must be finite");
            return DiurnalStatus::DataError;
        }
        let coeffs: DayCoefficients = match pca::expand_raw_day(basis, raw, k) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        std::slice::from_raw_parts_mut(coeffs_out, k).copy_from_slice(&coeffs.e);
        if !mean_out.is_null() {
            *mean_out = coeffs.e0;
        }
        if !rms_out.is_null() {
            *rms_out = coeffs.rms;
        }
        if !residual_out.is_null() {
            *residual_out = coeffs.residual_norm;
        }
        DiurnalStatus::Ok
    })
}

/// Reconstructs a day in original units from `k` coefficients plus the
/// daily mean and RMS returned by `diurnal_model_expand_day`.
///
/// # Safety
/// `coeffs` must point to `k` doubles and `out` to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn diurnal_model_reconstruct(
    model: *const DiurnalModel,
    coeffs: *const f64,
    k: usize,
    daily_mean: f64,
    rms: f64,
    out: *mut f64,
) -> DiurnalStatus {
    guard(|| {
        if model.is_null() || coeffs.is_null() || out.is_null() {
            set_error("null pointer");
            return DiurnalStatus::NullPointer;
        }
        let basis = &(*model).basis;
        let day = DayCoefficients {
            sensor_id: String::new(),
            day: Default::default(),
            e0: daily_mean,
            rms,
            e: std::slice::from_raw_parts(coeffs, k).to_vec(),
            residual_norm: 0.0,
        };
        match pca::reconstruct(&day, basis) {
            Ok(values) => {
                std::slice::from_raw_parts_mut(out, basis.dim).copy_from_slice(&values);
                DiurnalStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Diagonalizes a symmetric `n x n` matrix (row-major).
///
/// Writes eigenvalues in descending order to `values_out` (length `n`) and
/// the matching unit eigenvectors to the rows of `vectors_out` (length
/// `n * n`).
///
/// # Safety
/// `matrix` must point to `n * n` doubles, `values_out` to `n`, and
/// `vectors_out` to `n * n`.
#[no_mangle]
pub unsafe extern "C" fn diurnal_eigen_symmetric(
    matrix: *const f64,
    n: usize,
    values_out: *mut f64,
    vectors_out: *mut f64,
) -> DiurnalStatus {
    guard(|| {
        if matrix.is_null() || values_out.is_null() || vectors_out.is_null() {
            set_error("null pointer");
            return DiurnalStatus::NullPointer;
        }
        let input = std::slice::from_raw_parts(matrix, n * n);
        match diurnal::eigen::eigen_symmetric(input, n) {
            Ok(eig) => {
                let eig = eig.into_sorted_descending();
                std::slice::from_raw_parts_mut(values_out, n).copy_from_slice(&eig.values);
                let vectors = std::slice::from_raw_parts_mut(vectors_out, n * n);
                for (i, v) in eig.vectors.iter().enumerate() {
                    vectors[i * n..(i + 1) * n].copy_from_slice(v);
                }
                DiurnalStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn diurnal_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}
