//! C ABI over `delaysmc`.
//!
//! Every fallible call returns a [`DsmcStatus`]; on failure the message is
//! kept per thread and read back with [`dsmc_last_error`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use delaysmc::analysis::{self, AuditSettings};
use delaysmc::harness::{self, Scenario, Trace};
use delaysmc::matnum::{self, Matrix};
use delaysmc::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DsmcStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or out-of-range index.
    InvalidArgument = 1,
    /// Scenario failed to parse or validate.
    Scenario = 2,
    Io = 3,
    /// Malformed trace file.
    Format = 4,
    /// Numerical failure: singular, not Hurwitz, dimension mismatch.
    Numeric = 5,
    /// The run stopped early; the partial trace is still returned.
    Aborted = 6,
    Panic = 7,
}

/// Parsed and validated scenario.
pub struct DsmcScenario(Scenario);

/// Simulation trace plus its column names as C strings.
pub struct DsmcTrace {
    trace: Trace,
    names: Vec<CString>,
}

impl DsmcTrace {
    fn new(trace: Trace) -> Box<Self> {
        let names = trace
            .dims
            .column_names()
            .into_iter()
            .map(|n| CString::new(n).expect("column names are ASCII"))
            .collect();
        Box::new(DsmcTrace { trace, names })
    }
}

/// Stability certificate. `delta_bar_max` is `INFINITY` when unbounded;
/// the `P₂`-derived fields are `NAN` when `Ā₂₂` is not Hurwitz.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct DsmcCertificate {
    pub lambda_max_p2: f64,
    pub mu: f64,
    pub beta1: f64,
    pub delta_bar_max: f64,
    pub delta_bar: f64,
    pub phi: f64,
    pub max_leakage_gain: f64,
    pub rho_required_norm_coeff: f64,
    pub feasible: bool,
}

/// Trace audit summary. Missing times are `NAN`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct DsmcAudit {
    pub sliding_reach_time: f64,
    pub sliding_band: f64,
    pub max_residual_ratio: f64,
    pub max_fault_error: f64,
    pub observer_settle_time: f64,
    pub lyapunov_checked: usize,
    pub lyapunov_violations: usize,
    pub passed: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> DsmcStatus {
    match e {
        Error::Schema { .. } | Error::Json(_) => DsmcStatus::Scenario,
        Error::Io { .. } => DsmcStatus::Io,
        Error::Format(_) | Error::Csv(_) => DsmcStatus::Format,
        Error::Divergence { .. } | Error::AssumptionViolated { .. } => DsmcStatus::Aborted,
        _ => DsmcStatus::Numeric,
    }
}

fn fail(e: Error) -> DsmcStatus {
    let status = status_of(&e);
    set_error(e.to_string());
    status
}

fn invalid(msg: &str) -> DsmcStatus {
    set_error(msg);
    DsmcStatus::InvalidArgument
}

/// Runs `f`, turning a panic into `Panic` so it never crosses the boundary.
fn guard(f: impl FnOnce() -> DsmcStatus) -> DsmcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DsmcStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, DsmcStatus> {
    if p.is_null() {
        return Err(invalid("null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid("string argument is not UTF-8"))
}

fn some_or_nan(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dsmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a scenario from a NUL-terminated JSON document.
///
/// # Safety
/// `json` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dsmc_scenario_from_json(json: *const c_char, out: *mut *mut DsmcScenario) -> DsmcStatus {
    guard(|| {
        if out.is_null() {
            return invalid("null output pointer");
        }
        let text = match str_arg(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match harness::load_scenario(text) {
            Ok(sc) => {
                *out = Box::into_raw(Box::new(DsmcScenario(sc)));
                DsmcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dsmc_scenario_from_file(path: *const c_char, out: *mut *mut DsmcScenario) -> DsmcStatus {
    guard(|| {
        if out.is_null() {
            return invalid("null output pointer");
        }
        let path = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match harness::load_scenario_file(Path::new(path)) {
            Ok(sc) => {
                *out = Box::into_raw(Box::new(DsmcScenario(sc)));
                DsmcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `scenario` must come from a `dsmc_scenario_from_*` call or be null.
#[no_mangle]
pub unsafe extern "C" fn dsmc_scenario_free(scenario: *mut DsmcScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Simulates the scenario. On `Aborted` the partial trace is still stored
/// in `out` and must be freed.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dsmc_run(scenario: *const DsmcScenario, out: *mut *mut DsmcTrace) -> DsmcStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return invalid("null argument");
        }
        match harness::run(&(*scenario).0) {
            Ok(trace) => {
                *out = Box::into_raw(DsmcTrace::new(trace));
                DsmcStatus::Ok
            }
            Err(aborted) => {
                *out = Box::into_raw(DsmcTrace::new(aborted.partial));
                set_error(aborted.reason.to_string());
                DsmcStatus::Aborted
            }
        }
    })
}

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dsmc_trace_read_csv(path: *const c_char, out: *mut *mut DsmcTrace) -> DsmcStatus {
    guard(|| {
        if out.is_null() {
            return invalid("null output pointer");
        }
        let path = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Trace::read_csv(Path::new(path)) {
            Ok(trace) => {
                *out = Box::into_raw(DsmcTrace::new(trace));
                DsmcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `trace` must be a live handle and `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn dsmc_trace_write_csv(trace: *const DsmcTrace, path: *const c_char) -> DsmcStatus {
    guard(|| {
        if trace.is_null() {
            return invalid("null trace");
        }
        let path = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match (*trace).trace.write_csv(Path::new(path)) {
            Ok(()) => DsmcStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Number of samples; 0 for a null handle.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dsmc_trace_len(trace: *const DsmcTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.len())
}

/// Number of columns per sample; 0 for a null handle.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dsmc_trace_columns(trace: *const DsmcTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.names.len())
}

/// Column header, owned by the trace; null when out of range.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dsmc_trace_column_name(trace: *const DsmcTrace, column: usize) -> *const c_char {
    trace
        .as_ref()
        .and_then(|t| t.names.get(column))
        .map_or(ptr::null(), |n| n.as_ptr())
}

/// Copies sample `row` into `values`, which holds `len` doubles and must
/// have room for every column.
///
/// # Safety
/// `trace` must be a live handle and `values` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dsmc_trace_row(trace: *const DsmcTrace, row: usize, values: *mut f64, len: usize) -> DsmcStatus {
    guard(|| {
        let Some(t) = trace.as_ref() else {
            return invalid("null trace");
        };
        if values.is_null() {
            return invalid("null output buffer");
        }
        let Some(r) = t.trace.rows.get(row) else {
            return invalid(&format!("row {row} out of range (len {})", t.trace.len()));
        };
        let v = r.values();
        if len < v.len() {
            return invalid(&format!("buffer holds {len} values, row has {}", v.len()));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), values, v.len());
        DsmcStatus::Ok
    })
}

/// # Safety
/// `trace` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn dsmc_trace_free(trace: *mut DsmcTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dsmc_certify(scenario: *const DsmcScenario, phi: f64, out: *mut DsmcCertificate) -> DsmcStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return invalid("null argument");
        }
        match analysis::certify(&(*scenario).0, phi) {
            Ok(r) => {
                *out = DsmcCertificate {
                    lambda_max_p2: some_or_nan(r.lambda_max_p2),
                    mu: some_or_nan(r.mu),
                    beta1: some_or_nan(r.beta1),
                    delta_bar_max: r.delta_bar_max.unwrap_or(f64::INFINITY),
                    delta_bar: r.delta_bar,
                    phi: r.phi,
                    max_leakage_gain: r.max_leakage_gain,
                    rho_required_norm_coeff: r.rho_required_norm_coeff,
                    feasible: r.feasible,
                };
                DsmcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Audits `trace` against `scenario` with default settings.
///
/// # Safety
/// Both handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dsmc_audit(scenario: *const DsmcScenario, trace: *const DsmcTrace, out: *mut DsmcAudit) -> DsmcStatus {
    guard(|| {
        if scenario.is_null() || trace.is_null() || out.is_null() {
            return invalid("null argument");
        }
        match analysis::audit(&(*scenario).0, &(*trace).trace, &AuditSettings::default()) {
            Ok(a) => {
                *out = DsmcAudit {
                    sliding_reach_time: some_or_nan(a.sliding_reach_time),
                    sliding_band: a.sliding_band,
                    max_residual_ratio: a.max_residual_ratio,
                    max_fault_error: a.max_fault_error,
                    observer_settle_time: some_or_nan(a.observer_settle_time),
                    lyapunov_checked: a.lyapunov_checked,
                    lyapunov_violations: a.lyapunov_violations,
                    passed: a.passed(),
                };
                DsmcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

unsafe fn square(n: usize, a: *const f64) -> Result<Matrix, DsmcStatus> {
    if a.is_null() || n == 0 {
        return Err(invalid("null matrix or zero size"));
    }
    let data = std::slice::from_raw_parts(a, n * n).to_vec();
    Matrix::from_row_major(n, n, data).map_err(fail)
}

unsafe fn store(m: &Matrix, out: *mut f64) {
    ptr::copy_nonoverlapping(m.as_slice().as_ptr(), out, m.as_slice().len());
}

/// `e^{A t}` for a row-major `n × n` matrix.
///
/// # Safety
/// `a` and `out` must each hold `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn dsmc_mat_exp(n: usize, a: *const f64, t: f64, out: *mut f64) -> DsmcStatus {
    guard(|| {
        if out.is_null() {
            return invalid("null output buffer");
        }
        let a = match square(n, a) {
            Ok(a) => a,
            Err(s) => return s,
        };
        match matnum::mat_exp(&a, t) {
            Ok(e) => {
                store(&e, out);
                DsmcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Solves `AᵀP + PA = −I` for Hurwitz `A` (row-major, `n × n`).
///
/// # Safety
/// `a` and `out` must each hold `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn dsmc_solve_lyapunov(n: usize, a: *const f64, out: *mut f64) -> DsmcStatus {
    guard(|| {
        if out.is_null() {
            return invalid("null output buffer");
        }
        let a = match square(n, a) {
            Ok(a) => a,
            Err(s) => return s,
        };
        match matnum::solve_lyapunov(&a) {
            Ok(p) => {
                store(&p, out);
                DsmcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
