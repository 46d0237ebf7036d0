//! C ABI over the localization library. Scenarios and trial traces live
//! behind opaque handles, every entry point returns a status code, and the
//! text of the most recent failure is kept per thread for
//! `coarseloc_last_error`. Panics are caught at the boundary and reported as
//! `Panic` instead of unwinding into the caller.

use coarseloc::harness::{
    active_localize, run_experiment, ScenarioConfig, TrialTrace, ValidatedScenario,
};
use coarseloc::svp::find_svp;
use nalgebra::DVector;
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Outcome of a call. Anything other than `Ok` leaves a description for
/// `coarseloc_last_error` on the calling thread.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CoarselocStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    BadUtf8 = 2,
    /// The scenario failed to parse or to validate.
    BadConfig = 3,
    /// The requested start state or landmark is inconsistent with the
    /// scenario.
    BadStart = 4,
    /// Creating or writing experiment outputs failed.
    Io = 5,
    /// An index or buffer length did not match the object.
    OutOfRange = 6,
    /// An internal panic was caught at the boundary.
    Panic = 7,
}

/// A validated scenario: plant, partition, boxes, and certified constants.
pub struct CoarselocScenario {
    inner: ValidatedScenario,
}

/// One closed-loop trial: per-step records plus the violation log.
pub struct CoarselocTrace {
    inner: TrialTrace,
}

/// Per-step scalars of a trace. `diam_xk_cloud` is NaN on steps without
/// contact, where no current-state estimate exists.
#[repr(C)]
pub struct CoarselocStep {
    pub k: usize,
    pub contact: bool,
    pub in_recovery: bool,
    pub diam_x0_cloud: f64,
    pub diam_x0_bound: f64,
    pub diam_m_cloud: f64,
    pub diam_xk_cloud: f64,
}

/// Batch totals of `coarseloc_run_experiment`.
#[repr(C)]
pub struct CoarselocSummary {
    pub trials: usize,
    /// Guarantees that failed across all trials; zero on a sound run.
    pub violations: usize,
    /// Longest run of consecutive contactless steps in any trial.
    pub max_gap: usize,
    pub wall_seconds: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl std::fmt::Display) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.to_string());
}

fn guard(f: impl FnOnce() -> CoarselocStatus) -> CoarselocStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic caught at the library boundary");
            CoarselocStatus::Panic
        }
    }
}

/// Copies `msg` into `buf` (truncated, always NUL-terminated when cap > 0)
/// and reports the full length in bytes, excluding the terminator.
fn copy_message(msg: &str, buf: *mut c_char, cap: usize) -> usize {
    let bytes = msg.as_bytes();
    if !buf.is_null() && cap > 0 {
        let n = bytes.len().min(cap - 1);
        unsafe {
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
    }
    bytes.len()
}

unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, CoarselocStatus> {
    if ptr.is_null() {
        set_error(format!("{what} pointer is null"));
        return Err(CoarselocStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        CoarselocStatus::BadUtf8
    })
}

fn install_scenario(cfg: ScenarioConfig, out: *mut *mut CoarselocScenario) -> CoarselocStatus {
    match cfg.validate() {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(CoarselocScenario { inner })) };
            CoarselocStatus::Ok
        }
        Err(e) => {
            set_error(e);
            CoarselocStatus::BadConfig
        }
    }
}

/// Message text of the most recent failure on this thread. Returns the full
/// message length in bytes (excluding the NUL terminator); the copy into
/// `buf` is truncated to `cap - 1` bytes and NUL-terminated.
///
/// # Safety
/// `buf` must be null or point at `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| copy_message(&e.borrow(), buf, cap))
}

/// Static name of a status code, for logs.
#[no_mangle]
pub extern "C" fn coarseloc_status_name(status: CoarselocStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        CoarselocStatus::Ok => b"ok\0",
        CoarselocStatus::NullPointer => b"null pointer\0",
        CoarselocStatus::BadUtf8 => b"bad utf-8\0",
        CoarselocStatus::BadConfig => b"bad config\0",
        CoarselocStatus::BadStart => b"bad start\0",
        CoarselocStatus::Io => b"io\0",
        CoarselocStatus::OutOfRange => b"out of range\0",
        CoarselocStatus::Panic => b"panic\0",
    };
    name.as_ptr().cast()
}

/// Parses and validates a scenario from TOML text. On success `*out` owns
/// the scenario and must be released with `coarseloc_scenario_free`; on
/// failure `*out` is set to null.
///
/// # Safety
/// `text` must be null or NUL-terminated; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_scenario_from_toml(
    text: *const c_char,
    out: *mut *mut CoarselocScenario,
) -> CoarselocStatus {
    guard(|| {
        if out.is_null() {
            set_error("out pointer is null");
            return CoarselocStatus::NullPointer;
        }
        *out = std::ptr::null_mut();
        let text = match read_str(text, "toml text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ScenarioConfig::from_toml_str(text) {
            Ok(cfg) => install_scenario(cfg, out),
            Err(e) => {
                set_error(e);
                CoarselocStatus::BadConfig
            }
        }
    })
}

/// Like `coarseloc_scenario_from_toml`, reading the text from a file.
///
/// # Safety
/// `path` must be null or NUL-terminated; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_scenario_load(
    path: *const c_char,
    out: *mut *mut CoarselocScenario,
) -> CoarselocStatus {
    guard(|| {
        if out.is_null() {
            set_error("out pointer is null");
            return CoarselocStatus::NullPointer;
        }
        *out = std::ptr::null_mut();
        let path = match read_str(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match ScenarioConfig::load(Path::new(path)) {
            Ok(cfg) => install_scenario(cfg, out),
            Err(e) => {
                set_error(e);
                CoarselocStatus::BadConfig
            }
        }
    })
}

/// Releases a scenario. Null is a no-op.
///
/// # Safety
/// `scenario` must be null or a live handle from a scenario constructor;
/// it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_scenario_free(scenario: *mut CoarselocScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// State dimension, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle from a scenario constructor.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_scenario_state_dim(scenario: *const CoarselocScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.sys.state_dim())
}

/// Input dimension, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle from a scenario constructor.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_scenario_input_dim(scenario: *const CoarselocScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.sys.input_dim())
}

/// Configured trial count, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle from a scenario constructor.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_scenario_trials(scenario: *const CoarselocScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.config.trials)
}

/// Configured steps per trial, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle from a scenario constructor.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_scenario_max_steps(scenario: *const CoarselocScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.config.max_steps)
}

/// Steps a full recovery sweep needs: partition size times controllability
/// index. 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle from a scenario constructor.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_scenario_recovery_window(
    scenario: *const CoarselocScenario,
) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.recovery_window())
}

/// Guaranteed ceiling on the initial-estimate diameter at step k. NaN for a
/// null handle.
///
/// # Safety
/// `scenario` must be null or a live handle from a scenario constructor.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_scenario_contraction_bound(
    scenario: *const CoarselocScenario,
    k: usize,
) -> f64 {
    scenario
        .as_ref()
        .map_or(f64::NAN, |s| s.inner.theoretical_bound(k))
}

/// Runs one closed-loop trial from an explicit start. `x0` and `m` must each
/// point at `coarseloc_scenario_state_dim` doubles, lie inside their
/// configured boxes, and start within sensing range of each other. On
/// success `*out` owns the trace and must be released with
/// `coarseloc_trace_free`.
///
/// # Safety
/// `scenario` must be null or a live handle from a scenario constructor.
/// Non-null `x0` and `m` must point at `coarseloc_scenario_state_dim`
/// doubles; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_run_trial(
    scenario: *const CoarselocScenario,
    x0: *const f64,
    m: *const f64,
    out: *mut *mut CoarselocTrace,
) -> CoarselocStatus {
    guard(|| {
        if out.is_null() {
            set_error("out pointer is null");
            return CoarselocStatus::NullPointer;
        }
        *out = std::ptr::null_mut();
        let Some(s) = scenario.as_ref() else {
            set_error("scenario handle is null");
            return CoarselocStatus::NullPointer;
        };
        if x0.is_null() || m.is_null() {
            set_error("x0 and m must be non-null");
            return CoarselocStatus::NullPointer;
        }
        let n = s.inner.sys.state_dim();
        let x0 = DVector::from_column_slice(std::slice::from_raw_parts(x0, n));
        let m = DVector::from_column_slice(std::slice::from_raw_parts(m, n));
        if !s.inner.x0_box.contains(&x0) {
            set_error("x0 lies outside the configured initial box");
            return CoarselocStatus::BadStart;
        }
        if !s.inner.m_box.contains(&m) {
            set_error("m lies outside the configured landmark box");
            return CoarselocStatus::BadStart;
        }
        if (&x0 - &m).norm() > s.inner.config.r {
            set_error("x0 is not within sensing range of m");
            return CoarselocStatus::BadStart;
        }
        let inner = active_localize(&s.inner, &x0, &m);
        *out = Box::into_raw(Box::new(CoarselocTrace { inner }));
        CoarselocStatus::Ok
    })
}

/// Releases a trace. Null is a no-op.
///
/// # Safety
/// `trace` must be null or a live handle from `coarseloc_run_trial`; it
/// is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_trace_free(trace: *mut CoarselocTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of recorded steps, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle from `coarseloc_run_trial`.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_trace_len(trace: *const CoarselocTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.inner.steps.len())
}

/// Longest run of consecutive contactless steps, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle from `coarseloc_run_trial`.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_trace_max_gap(trace: *const CoarselocTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.inner.max_gap)
}

/// Number of recovery plans started, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle from `coarseloc_run_trial`.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_trace_recovery_events(trace: *const CoarselocTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.inner.recovery_events)
}

/// Number of guarantees that failed during the trial, or 0 for a null
/// handle. Zero on a sound run.
///
/// # Safety
/// `trace` must be null or a live handle from `coarseloc_run_trial`.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_trace_violation_count(trace: *const CoarselocTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.inner.violations.len())
}

/// Copies the i-th violation message with `coarseloc_last_error` semantics.
/// Returns 0 when the handle is null or the index is past the end.
///
/// # Safety
/// `trace` must be null or a live handle from `coarseloc_run_trial`.
/// `buf` must be null or point at `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_trace_violation(
    trace: *const CoarselocTrace,
    index: usize,
    buf: *mut c_char,
    cap: usize,
) -> usize {
    let Some(t) = trace.as_ref() else { return 0 };
    match t.inner.violations.get(index) {
        Some(v) => copy_message(v, buf, cap),
        None => 0,
    }
}

/// Copies the scalar fields of step `index` into `*step`.
///
/// # Safety
/// `trace` must be null or a live handle from `coarseloc_run_trial`.
/// `step` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_trace_step(
    trace: *const CoarselocTrace,
    index: usize,
    step: *mut CoarselocStep,
) -> CoarselocStatus {
    guard(|| {
        let Some(t) = trace.as_ref() else {
            set_error("trace handle is null");
            return CoarselocStatus::NullPointer;
        };
        if step.is_null() {
            set_error("step pointer is null");
            return CoarselocStatus::NullPointer;
        }
        let Some(rec) = t.inner.steps.get(index) else {
            set_error(format!(
                "step {index} is past the end of a {}-step trace",
                t.inner.steps.len()
            ));
            return CoarselocStatus::OutOfRange;
        };
        *step = CoarselocStep {
            k: rec.k,
            contact: rec.y,
            in_recovery: rec.in_recovery,
            diam_x0_cloud: rec.diam_x0_cloud,
            diam_x0_bound: rec.diam_x0_bound,
            diam_m_cloud: rec.diam_m_cloud,
            diam_xk_cloud: rec.diam_xk_cloud.unwrap_or(f64::NAN),
        };
        CoarselocStatus::Ok
    })
}

unsafe fn copy_vector(v: &DVector<f64>, what: &str, buf: *mut f64, len: usize) -> CoarselocStatus {
    if buf.is_null() {
        set_error("buffer pointer is null");
        return CoarselocStatus::NullPointer;
    }
    if len != v.len() {
        set_error(format!(
            "{what} has {} entries, buffer holds {len}",
            v.len()
        ));
        return CoarselocStatus::OutOfRange;
    }
    std::ptr::copy_nonoverlapping(v.as_slice().as_ptr(), buf, len);
    CoarselocStatus::Ok
}

/// Copies the state at step `index` into `buf`, which must hold exactly
/// `coarseloc_scenario_state_dim` doubles.
///
/// # Safety
/// `trace` must be null or a live handle from `coarseloc_run_trial`.
/// Non-null `buf` must point at `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_trace_state(
    trace: *const CoarselocTrace,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> CoarselocStatus {
    guard(|| {
        let Some(t) = trace.as_ref() else {
            set_error("trace handle is null");
            return CoarselocStatus::NullPointer;
        };
        let Some(rec) = t.inner.steps.get(index) else {
            set_error(format!(
                "step {index} is past the end of a {}-step trace",
                t.inner.steps.len()
            ));
            return CoarselocStatus::OutOfRange;
        };
        copy_vector(&rec.x, "state", buf, len)
    })
}

/// Copies the control applied at step `index` into `buf`, which must hold
/// exactly `coarseloc_scenario_input_dim` doubles.
///
/// # Safety
/// `trace` must be null or a live handle from `coarseloc_run_trial`.
/// Non-null `buf` must point at `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_trace_control(
    trace: *const CoarselocTrace,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> CoarselocStatus {
    guard(|| {
        let Some(t) = trace.as_ref() else {
            set_error("trace handle is null");
            return CoarselocStatus::NullPointer;
        };
        let Some(rec) = t.inner.steps.get(index) else {
            set_error(format!(
                "step {index} is past the end of a {}-step trace",
                t.inner.steps.len()
            ));
            return CoarselocStatus::OutOfRange;
        };
        copy_vector(&rec.u, "control", buf, len)
    })
}

/// Runs the configured batch of trials and writes steps.csv, aggregate.csv,
/// and (with `plots`) SVG diameter charts under `out_dir`. Totals land in
/// `*summary`.
///
/// # Safety
/// `scenario` must be null or a live handle from a scenario constructor.
/// `out_dir` must be null or NUL-terminated; `summary` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_run_experiment(
    scenario: *const CoarselocScenario,
    out_dir: *const c_char,
    plots: bool,
    summary: *mut CoarselocSummary,
) -> CoarselocStatus {
    guard(|| {
        let Some(s) = scenario.as_ref() else {
            set_error("scenario handle is null");
            return CoarselocStatus::NullPointer;
        };
        if summary.is_null() {
            set_error("summary pointer is null");
            return CoarselocStatus::NullPointer;
        }
        let dir = match read_str(out_dir, "output directory") {
            Ok(d) => d,
            Err(status) => return status,
        };
        match run_experiment(&s.inner, Path::new(dir), plots) {
            Ok(result) => {
                *summary = CoarselocSummary {
                    trials: result.traces.len(),
                    violations: result.violations.len(),
                    max_gap: result.max_gap,
                    wall_seconds: result.wall.as_secs_f64(),
                };
                CoarselocStatus::Ok
            }
            Err(e) => {
                set_error(e);
                CoarselocStatus::Io
            }
        }
    })
}

/// Searches for the minimal covering partition at aperture `alpha` in
/// dimension `dim` and reports its size and worst pairwise alignment.
///
/// # Safety
/// `out_count` and `out_eta` must each be null or writable.
#[no_mangle]
pub unsafe extern "C" fn coarseloc_partition(
    alpha: f64,
    dim: usize,
    seed: u64,
    out_count: *mut usize,
    out_eta: *mut f64,
) -> CoarselocStatus {
    guard(|| {
        if out_count.is_null() || out_eta.is_null() {
            set_error("out_count and out_eta must be non-null");
            return CoarselocStatus::NullPointer;
        }
        match find_svp(alpha, dim, None, seed) {
            Ok(svp) => {
                *out_count = svp.len();
                *out_eta = svp.eta();
                CoarselocStatus::Ok
            }
            Err(e) => {
                set_error(e);
                CoarselocStatus::BadConfig
            }
        }
    })
}
