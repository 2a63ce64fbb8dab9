//! C ABI over `chebyqst`.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free` function. Every fallible call returns a `CqStatus`;
//! on failure `cq_last_error` describes the most recent error on the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chebyqst::fields::GridFunction;
use chebyqst::tomography::{run_qst_cp, Mode, StopRule, TomographyConfig, TomographyResult};
use chebyqst::{Complex64, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    DataError = 4,
    OutOfRange = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CqMode {
    Exact = 0,
    Ideal = 1,
    Faithful = 2,
}

/// One estimated coefficient.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CqCoefficient {
    pub re: f64,
    pub im: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub total_degree: usize,
    pub shots: u64,
    pub prep_success: f64,
}

/// Opaque tomography configuration.
pub struct CqConfig {
    inner: TomographyConfig,
}

/// Opaque tomography result.
pub struct CqResult {
    inner: TomographyResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: CqStatus, msg: impl Into<String>) -> CqStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> CqStatus {
    match e {
        Error::InvalidConfig(_) => CqStatus::InvalidConfig,
        _ => CqStatus::DataError,
    }
}

fn guard(f: impl FnOnce() -> CqStatus) -> CqStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(CqStatus::Panic, "internal panic"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn cq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// New configuration; `qubits` holds `n_dims` per-dimension qubit counts.
/// Defaults: order-0 stop rule, 500 shots, seed 0. Returns NULL on bad input.
///
/// # Safety
/// `qubits` must point to `n_dims` readable values.
#[no_mangle]
pub unsafe extern "C" fn cq_config_new(qubits: *const usize, n_dims: usize, mode: CqMode) -> *mut CqConfig {
    if qubits.is_null() || n_dims == 0 {
        set_error("qubits must be a non-empty array");
        return ptr::null_mut();
    }
    let qubits = std::slice::from_raw_parts(qubits, n_dims).to_vec();
    let mode = match mode {
        CqMode::Exact => Mode::Exact,
        CqMode::Ideal => Mode::Ideal,
        CqMode::Faithful => Mode::Faithful,
    };
    Box::into_raw(Box::new(CqConfig {
        inner: TomographyConfig::new(qubits, StopRule::Order(0), mode),
    }))
}

/// # Safety
/// `config` must be NULL or a handle from `cq_config_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cq_config_free(config: *mut CqConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

unsafe fn with_config(config: *mut CqConfig, f: impl FnOnce(&mut TomographyConfig)) -> CqStatus {
    match config.as_mut() {
        Some(c) => {
            f(&mut c.inner);
            CqStatus::Ok
        }
        None => fail(CqStatus::NullPointer, "config is NULL"),
    }
}

/// Stop at the first shell whose partial sum reaches `a_c`.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cq_config_set_threshold(config: *mut CqConfig, a_c: f64) -> CqStatus {
    with_config(config, |c| c.stop = StopRule::Threshold(a_c))
}

/// Estimate every shell up to total degree `order`.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cq_config_set_order(config: *mut CqConfig, order: usize) -> CqStatus {
    with_config(config, |c| c.stop = StopRule::Order(order))
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cq_config_set_max_order(config: *mut CqConfig, max_order: usize) -> CqStatus {
    with_config(config, |c| c.max_order = Some(max_order))
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cq_config_set_shots(config: *mut CqConfig, shots: u64) -> CqStatus {
    with_config(config, |c| c.shots_per_part = shots)
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cq_config_set_seed(config: *mut CqConfig, seed: u64) -> CqStatus {
    with_config(config, |c| c.seed = seed)
}

/// Runs tomography on `len` samples (`im` may be NULL for real data). The
/// samples are normalized first. On success `*out` receives a result handle.
///
/// # Safety
/// `config` must be a live handle, `re` (and `im` if non-NULL) must point to
/// `len` readable values, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cq_run(
    config: *const CqConfig,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut CqResult,
) -> CqStatus {
    guard(|| {
        let Some(config) = config.as_ref() else {
            return fail(CqStatus::NullPointer, "config is NULL");
        };
        if re.is_null() || out.is_null() {
            return fail(CqStatus::NullPointer, "re and out must not be NULL");
        }
        let re = std::slice::from_raw_parts(re, len);
        let im = if im.is_null() {
            None
        } else {
            Some(std::slice::from_raw_parts(im, len))
        };
        let samples = (0..len)
            .map(|k| Complex64::new(re[k], im.map_or(0.0, |v| v[k])))
            .collect();
        if let Err(e) = config.inner.validate() {
            return fail(status_of(&e), e.to_string());
        }
        let result =
            GridFunction::encode(config.inner.dims(), samples).and_then(|g| run_qst_cp(&g.values, &config.inner));
        match result {
            Ok(r) => {
                *out = Box::into_raw(Box::new(CqResult { inner: r }));
                CqStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `result` must be NULL or a handle from `cq_run` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cq_result_free(result: *mut CqResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cq_result_stop_order(result: *const CqResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.stop_order)
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cq_result_converged(result: *const CqResult) -> bool {
    result.as_ref().is_some_and(|r| r.inner.converged)
}

/// Fidelity between the normalized input and the reconstruction; NaN for NULL.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cq_result_fidelity(result: *const CqResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.fidelity)
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cq_result_num_coefficients(result: *const CqResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.coefficients.len())
}

/// Total shots across all Hadamard tests (0 in exact mode).
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cq_result_total_shots(result: *const CqResult) -> u64 {
    result.as_ref().map_or(0, |r| r.inner.counters.total_shots)
}

/// Coefficient `i` in estimation order.
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cq_result_coefficient(result: *const CqResult, i: usize, out: *mut CqCoefficient) -> CqStatus {
    let (Some(r), false) = (result.as_ref(), out.is_null()) else {
        return fail(CqStatus::NullPointer, "result and out must not be NULL");
    };
    let Some(c) = r.inner.coefficients.get(i) else {
        return fail(CqStatus::OutOfRange, format!("coefficient {i} out of range"));
    };
    *out = CqCoefficient {
        re: c.re,
        im: c.im,
        stderr_re: c.stderr_re,
        stderr_im: c.stderr_im,
        total_degree: c.index.total_degree(),
        shots: c.shots_used,
        prep_success: c.prep_success,
    };
    CqStatus::Ok
}

/// Writes the multi-index of coefficient `i` into `degrees` (capacity `cap`).
/// Returns the number of dimensions, or 0 on error.
///
/// # Safety
/// `result` must be a live handle and `degrees` writable for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn cq_result_index(result: *const CqResult, i: usize, degrees: *mut usize, cap: usize) -> usize {
    let Some(c) = result.as_ref().and_then(|r| r.inner.coefficients.get(i)) else {
        set_error("no such coefficient");
        return 0;
    };
    let d = c.index.degrees();
    if degrees.is_null() || cap < d.len() {
        set_error("index buffer too small");
        return 0;
    }
    ptr::copy_nonoverlapping(d.as_ptr(), degrees, d.len());
    d.len()
}

/// Copies up to `cap` partial sums into `out`; returns how many exist.
///
/// # Safety
/// `result` must be a live handle; `out` writable for `cap` values or NULL.
#[no_mangle]
pub unsafe extern "C" fn cq_result_partial_sums(result: *const CqResult, out: *mut f64, cap: usize) -> usize {
    let Some(r) = result.as_ref() else { return 0 };
    let sums = &r.inner.partial_sums;
    if !out.is_null() {
        ptr::copy_nonoverlapping(sums.as_ptr(), out, sums.len().min(cap));
    }
    sums.len()
}

/// Reconstruction in normalized units; `re` and `im` must hold `len` values,
/// which must equal the grid size.
///
/// # Safety
/// `result` must be a live handle; `re`, `im` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn cq_result_reconstruction(
    result: *const CqResult,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> CqStatus {
    let Some(r) = result.as_ref() else {
        return fail(CqStatus::NullPointer, "result is NULL");
    };
    if re.is_null() || im.is_null() {
        return fail(CqStatus::NullPointer, "output buffers must not be NULL");
    }
    let recon = &r.inner.reconstruction;
    if len != recon.len() {
        return fail(
            CqStatus::InvalidArgument,
            format!("expected {} values, got {len}", recon.len()),
        );
    }
    for (k, v) in recon.iter().enumerate() {
        *re.add(k) = v.re;
        *im.add(k) = v.im;
    }
    CqStatus::Ok
}

/// The full result as JSON; free with `cq_string_free`. NULL on error.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cq_result_to_json(result: *const CqResult) -> *mut c_char {
    let Some(r) = result.as_ref() else {
        set_error("result is NULL");
        return ptr::null_mut();
    };
    match serde_json::to_string(&r.inner) {
        Ok(s) => CString::new(s).map_or(ptr::null_mut(), CString::into_raw),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Samples the named builtin function at `2^n` points of its default grid,
/// normalized, into `out` (capacity `cap`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` writable for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn cq_sample_builtin(name: *const c_char, n: usize, out: *mut f64, cap: usize) -> CqStatus {
    if name.is_null() || out.is_null() {
        return fail(CqStatus::NullPointer, "name and out must not be NULL");
    }
    let Ok(name) = CStr::from_ptr(name).to_str() else {
        return fail(CqStatus::InvalidArgument, "name is not UTF-8");
    };
    if n >= usize::BITS as usize || cap < 1usize << n {
        return fail(CqStatus::InvalidArgument, "output buffer too small");
    }
    match chebyqst::fields::sample_function(name, n) {
        Ok(g) => {
            for (k, v) in g.values.iter().enumerate() {
                *out.add(k) = v.re;
            }
            CqStatus::Ok
        }
        Err(e @ Error::UnknownBuiltin(_)) => fail(CqStatus::InvalidArgument, e.to_string()),
        Err(e) => fail(status_of(&e), e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(cq_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn null_config_reports_error() {
        assert_eq!(unsafe { cq_config_set_seed(ptr::null_mut(), 1) }, CqStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(cq_last_error()) };
        assert!(msg.to_str().unwrap().contains("NULL"));
    }
}
