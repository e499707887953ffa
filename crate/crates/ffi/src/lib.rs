//! C ABI over the convexflows solver.
//!
//! Problems and results are opaque handles owned by the caller and released
//! with `cf_problem_free` / `cf_result_free`. Fallible calls return a
//! [`CfError`] code; the message of the most recent failure on the calling
//! thread is available from [`cf_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use convexflows::generate;
use convexflows::io::{parse_problem, parse_problem_str, problem_to_json, result_to_json};
use convexflows::{Mode, Problem, SolveResult, SolverConfig, Status};

/// Opaque problem handle.
pub struct CfProblem(Problem);

/// Opaque solve result handle.
pub struct CfResult(SolveResult);

#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfError {
    CF_OK = 0,
    /// A required pointer argument was null.
    CF_ERR_NULL = 1,
    /// The problem, generator arguments or solver options were rejected.
    CF_ERR_INVALID = 2,
    CF_ERR_IO = 3,
    /// A Rust panic was caught at the boundary.
    CF_ERR_PANIC = 4,
    /// The caller's buffer was too short; the needed length was written.
    CF_ERR_BUFFER = 5,
    CF_ERR_UTF8 = 6,
}

#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfMode {
    CF_MODE_AUTO = 0,
    CF_MODE_REDUCED = 1,
    CF_MODE_EXTENDED = 2,
}

#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfStatus {
    CF_STATUS_OPTIMAL = 0,
    CF_STATUS_MAX_ITER = 1,
    CF_STATUS_LINE_SEARCH_FAILURE = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CfSolverOptions {
    pub tol_gap: f64,
    pub tol_grad: f64,
    pub max_iter: usize,
    pub threads: usize,
    pub mode: CfMode,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let mut bytes = msg.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(CfError, String);

impl From<convexflows::Error> for Failure {
    fn from(e: convexflows::Error) -> Self {
        let code = match e {
            convexflows::Error::Io(_) => CfError::CF_ERR_IO,
            _ => CfError::CF_ERR_INVALID,
        };
        Failure(code, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CfError::CF_ERR_NULL, format!("{what} is null"))
}

/// Runs `f` behind a panic guard and records any failure.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CfError {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_last_error();
            CfError::CF_OK
        }
        Ok(Err(Failure(code, msg))) => {
            set_last_error(msg);
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            CfError::CF_ERR_PANIC
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure(CfError::CF_ERR_UTF8, format!("{what}: {e}")))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(s).map_err(|e| Failure(CfError::CF_ERR_INVALID, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next `cf_*` call on the same thread.
#[no_mangle]
pub extern "C" fn cf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from a `cf_*` call that returns an owned string and must not
/// be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a problem from a NUL-terminated JSON document.
///
/// # Safety
/// `json` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cf_problem_from_json(json: *const c_char, out: *mut *mut CfProblem) -> CfError {
    guard(|| {
        let text = read_str(json, "json")?;
        write_out(out, CfProblem(parse_problem_str(text)?))
    })
}

/// # Safety
/// `path` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cf_problem_from_file(path: *const c_char, out: *mut *mut CfProblem) -> CfError {
    guard(|| {
        let path = read_str(path, "path")?;
        write_out(out, CfProblem(parse_problem(Path::new(path))?))
    })
}

/// Serializes a problem to JSON. Free the string with `cf_string_free`.
///
/// # Safety
/// `problem` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cf_problem_to_json(problem: *const CfProblem, out: *mut *mut c_char) -> CfError {
    guard(|| {
        let p = handle(problem, "problem")?;
        write_string(out, problem_to_json(&p.0, None)?)
    })
}

/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cf_generate_opf(
    nodes: usize,
    periods: usize,
    seed: u64,
    out: *mut *mut CfProblem,
) -> CfError {
    guard(|| write_out(out, CfProblem(generate::generate_opf(nodes, periods, seed)?)))
}

/// Three-node scenario, with or without the battery.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cf_generate_preset(periods: usize, battery: bool, out: *mut *mut CfProblem) -> CfError {
    guard(|| write_out(out, CfProblem(generate::three_node_preset(periods, battery)?)))
}

/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cf_generate_cfmm(
    markets: usize,
    seed: u64,
    penalties: bool,
    out: *mut *mut CfProblem,
) -> CfError {
    guard(|| write_out(out, CfProblem(generate::generate_cfmm(markets, seed, penalties)?)))
}

/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cf_generate_fisher(
    buyers: usize,
    goods: usize,
    seed: u64,
    out: *mut *mut CfProblem,
) -> CfError {
    guard(|| write_out(out, CfProblem(generate::generate_fisher(buyers, goods, seed)?)))
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_problem_num_nodes(problem: *const CfProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.num_nodes())
}

/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_problem_num_edges(problem: *const CfProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.num_edges())
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cf_problem_free(problem: *mut CfProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

#[no_mangle]
pub extern "C" fn cf_solver_options_default() -> CfSolverOptions {
    let d = SolverConfig::default();
    CfSolverOptions {
        tol_gap: d.tol_gap,
        tol_grad: d.tol_grad,
        max_iter: d.max_iter,
        threads: d.threads,
        mode: CfMode::CF_MODE_AUTO,
    }
}

/// Solves `problem`. A null `options` uses the defaults. Reaching the
/// iteration limit still returns `CF_OK`; inspect `cf_result_status`.
///
/// # Safety
/// `problem` must be a live handle, `options` null or readable, and `out` a
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cf_solve(
    problem: *const CfProblem,
    options: *const CfSolverOptions,
    out: *mut *mut CfResult,
) -> CfError {
    guard(|| {
        let p = handle(problem, "problem")?;
        let opts = options.as_ref().copied().unwrap_or_else(|| cf_solver_options_default());
        let cfg = SolverConfig {
            mode: match opts.mode {
                CfMode::CF_MODE_AUTO => Mode::Auto,
                CfMode::CF_MODE_REDUCED => Mode::Reduced,
                CfMode::CF_MODE_EXTENDED => Mode::Extended,
            },
            tol_gap: opts.tol_gap,
            tol_grad: opts.tol_grad,
            max_iter: opts.max_iter,
            threads: opts.threads,
            ..SolverConfig::default()
        };
        write_out(out, CfResult(convexflows::solve(&p.0, &cfg)?))
    })
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_result_status(result: *const CfResult) -> CfStatus {
    match (*result).0.status {
        Status::Optimal => CfStatus::CF_STATUS_OPTIMAL,
        Status::MaxIter => CfStatus::CF_STATUS_MAX_ITER,
        Status::LineSearchFailure => CfStatus::CF_STATUS_LINE_SEARCH_FAILURE,
    }
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_result_iterations(result: *const CfResult) -> usize {
    (*result).0.iterations
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_result_dual_value(result: *const CfResult) -> f64 {
    (*result).0.dual_value
}

/// Certified primal value; negative infinity when no recovered flow was feasible.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_result_primal_value(result: *const CfResult) -> f64 {
    (*result).0.primal_value
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_result_relative_gap(result: *const CfResult) -> f64 {
    (*result).0.relative_gap
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize, needed: *mut usize) -> Result<(), Failure> {
    if !needed.is_null() {
        *needed = src.len();
    }
    if len < src.len() {
        return Err(Failure(
            CfError::CF_ERR_BUFFER,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

/// Copies the node prices into `buf`. `needed`, when non-null, receives the
/// node count, so a first call with `len = 0` sizes the buffer.
///
/// # Safety
/// `result` must be a live handle, `buf` must hold `len` doubles, and `needed`
/// must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cf_result_nu(result: *const CfResult, buf: *mut f64, len: usize, needed: *mut usize) -> CfError {
    guard(|| copy_out(&handle(result, "result")?.0.nu, buf, len, needed))
}

/// Copies the recovered net flow into `buf`; same calling convention as `cf_result_nu`.
///
/// # Safety
/// See `cf_result_nu`.
#[no_mangle]
pub unsafe extern "C" fn cf_result_y_hat(
    result: *const CfResult,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> CfError {
    guard(|| copy_out(&handle(result, "result")?.0.y_hat, buf, len, needed))
}

/// Result file contents as JSON. Free the string with `cf_string_free`.
///
/// # Safety
/// `result` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cf_result_to_json(result: *const CfResult, out: *mut *mut c_char) -> CfError {
    guard(|| {
        let r = handle(result, "result")?;
        write_string(out, result_to_json(&r.0, false))
    })
}

/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cf_result_free(result: *mut CfResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
