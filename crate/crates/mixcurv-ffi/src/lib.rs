//! C ABI for the mixcurv verification engine.
//!
//! The surface follows the usual conventions for C bindings:
//!
//! * every fallible call returns a [`MixcurvStatus`] code and writes its
//!   result through an out-pointer;
//! * a completed verification run is an opaque [`MixcurvRun`] handle that
//!   must be released with [`mixcurv_run_free`];
//! * strings returned through out-pointers are NUL-terminated heap copies
//!   owned by the caller, released with [`mixcurv_string_free`];
//! * a failing call stores a human-readable message retrievable with
//!   [`mixcurv_last_error_message`];
//! * every entry point catches panics and converts them into
//!   `MIXCURV_STATUS_PANIC` instead of unwinding across the ABI.
//!
//! The generated header lives at `include/mixcurv.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mixcurv::error::GeomError;
use mixcurv::identities::SignVariant;
use mixcurv::report::Report;
use mixcurv::runner::RunConfig;

/// Result code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixcurvStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// A configuration value or string argument was rejected.
    InvalidArgument = 2,
    /// A requested scenario name is not in the catalog.
    UnknownScenario = 3,
    /// The engine failed while building or sweeping a scenario.
    EngineError = 4,
    /// An internal panic was caught at the ABI boundary.
    Panic = 5,
}

/// Sign convention for the squared horizontal mean-curvature term in the
/// mixed scalar curvature identity.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixcurvSign {
    /// Resolve the sign numerically from internal probe scenarios.
    Auto = 0,
    /// Force the `+|xi_H|^2` variant.
    Plus = 1,
    /// Force the `-|xi_H|^2` variant.
    Minus = 2,
}

/// Verification run parameters; obtain defaults with
/// [`mixcurv_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MixcurvConfig {
    /// Grid nodes per chart axis for the identity sweep.
    pub grid_n: usize,
    /// Seeded random interior points added to the sweep.
    pub points: usize,
    /// Seed for the random point stream.
    pub seed: u64,
    /// Max |residual| an evaluated identity may reach and still pass.
    pub tol: f64,
    /// Hypothesis gate threshold for the specialized identities.
    pub gate_tol: f64,
    /// Sign convention for the squared horizontal mean-curvature term.
    pub xi_h_sign: MixcurvSign,
}

/// Opaque handle to a completed verification run.
pub struct MixcurvRun {
    report: Report,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let stored = CString::new(message)
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(stored));
}

fn status_for(err: &GeomError) -> MixcurvStatus {
    match err {
        GeomError::UnknownScenario { .. } => MixcurvStatus::UnknownScenario,
        GeomError::InvalidConfig(_) | GeomError::ParseError { .. } => {
            MixcurvStatus::InvalidArgument
        }
        _ => MixcurvStatus::EngineError,
    }
}

fn fail(status: MixcurvStatus, message: String) -> MixcurvStatus {
    set_last_error(message);
    status
}

/// Runs `f` with panics converted to `MIXCURV_STATUS_PANIC`.
fn guard(f: impl FnOnce() -> MixcurvStatus) -> MixcurvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = if let Some(s) = payload.downcast_ref::<&str>() {
                (*s).to_string()
            } else if let Some(s) = payload.downcast_ref::<String>() {
                s.clone()
            } else {
                "unknown panic payload".to_string()
            };
            fail(MixcurvStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

/// Copies `s` to a NUL-terminated heap string for the caller.
fn export_string(s: &str, out: *mut *mut c_char) -> MixcurvStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            MixcurvStatus::Ok
        }
        Err(_) => fail(
            MixcurvStatus::EngineError,
            "string contains an interior NUL byte".to_string(),
        ),
    }
}

/// Library version as a static NUL-terminated string; never freed.
#[no_mangle]
pub extern "C" fn mixcurv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Number of scenarios in the built-in catalog.
#[no_mangle]
pub extern "C" fn mixcurv_builtin_count() -> usize {
    mixcurv::catalog::builtin_names().len()
}

/// Writes the name of built-in scenario `index` (in catalog order) to
/// `out`; free the string with [`mixcurv_string_free`].
///
/// # Safety
///
/// `out` must be a valid pointer to writable memory for one `char *`.
#[no_mangle]
pub unsafe extern "C" fn mixcurv_builtin_name(
    index: usize,
    out: *mut *mut c_char,
) -> MixcurvStatus {
    guard(|| {
        if out.is_null() {
            return fail(MixcurvStatus::NullPointer, "out is NULL".to_string());
        }
        let names = mixcurv::catalog::builtin_names();
        match names.get(index) {
            Some(name) => export_string(name, out),
            None => fail(
                MixcurvStatus::InvalidArgument,
                format!(
                    "scenario index {index} out of range (catalog has {})",
                    names.len()
                ),
            ),
        }
    })
}

/// Fills `out` with the default run parameters (33 grid nodes per axis,
/// 100 random points, seed 42, tolerances 1e-8, automatic sign).
///
/// # Safety
///
/// `out` must be a valid pointer to writable memory for one
/// `MixcurvConfig`.
#[no_mangle]
pub unsafe extern "C" fn mixcurv_config_default(out: *mut MixcurvConfig) -> MixcurvStatus {
    guard(|| {
        if out.is_null() {
            return fail(MixcurvStatus::NullPointer, "out is NULL".to_string());
        }
        let d = RunConfig::default();
        *out = MixcurvConfig {
            grid_n: d.grid_n,
            points: d.points,
            seed: d.seed,
            tol: d.tol,
            gate_tol: d.gate_tol,
            xi_h_sign: MixcurvSign::Auto,
        };
        MixcurvStatus::Ok
    })
}

/// Verifies scenarios and writes a run handle to `out` on success.
///
/// `names`/`names_len` select scenarios by catalog name; pass
/// `names_len == 0` (with `names` possibly NULL) to run the whole
/// catalog. `config` may be NULL for the defaults. A completed run with
/// failing residuals is still `MIXCURV_STATUS_OK`; inspect it with
/// [`mixcurv_run_overall_pass`]. Release the handle with
/// [`mixcurv_run_free`].
///
/// # Safety
///
/// `out` must be a valid pointer to writable memory for one
/// `MixcurvRun *`. If non-NULL, `config` must point to a valid
/// `MixcurvConfig` and `names` to `names_len` valid NUL-terminated
/// strings.
#[no_mangle]
pub unsafe extern "C" fn mixcurv_run(
    config: *const MixcurvConfig,
    names: *const *const c_char,
    names_len: usize,
    out: *mut *mut MixcurvRun,
) -> MixcurvStatus {
    guard(|| {
        if out.is_null() {
            return fail(MixcurvStatus::NullPointer, "out is NULL".to_string());
        }
        if names_len > 0 && names.is_null() {
            return fail(
                MixcurvStatus::NullPointer,
                "names is NULL but names_len is nonzero".to_string(),
            );
        }

        let mut run_config = RunConfig::default();
        if !config.is_null() {
            let c = &*config;
            run_config.grid_n = c.grid_n;
            run_config.points = c.points;
            run_config.seed = c.seed;
            run_config.tol = c.tol;
            run_config.gate_tol = c.gate_tol;
            run_config.forced_sign = match c.xi_h_sign {
                MixcurvSign::Auto => None,
                MixcurvSign::Plus => Some(SignVariant::Plus),
                MixcurvSign::Minus => Some(SignVariant::Minus),
            };
        }

        if names_len > 0 {
            let mut selected = Vec::with_capacity(names_len);
            for i in 0..names_len {
                let entry = *names.add(i);
                if entry.is_null() {
                    return fail(MixcurvStatus::NullPointer, format!("names[{i}] is NULL"));
                }
                match CStr::from_ptr(entry).to_str() {
                    Ok(s) => selected.push(s.to_string()),
                    Err(_) => {
                        return fail(
                            MixcurvStatus::InvalidArgument,
                            format!("names[{i}] is not valid UTF-8"),
                        )
                    }
                }
            }
            run_config.scenario_names = Some(selected);
        }

        match mixcurv::run(&run_config) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(MixcurvRun { report }));
                MixcurvStatus::Ok
            }
            Err(err) => fail(status_for(&err), err.to_string()),
        }
    })
}

unsafe fn borrow_run<'a>(run: *const MixcurvRun) -> Option<&'a MixcurvRun> {
    if run.is_null() {
        None
    } else {
        Some(&*run)
    }
}

/// Writes whether every scenario in the run passed.
///
/// # Safety
///
/// `run` must be a handle from [`mixcurv_run`] that has not been freed;
/// `out` must be a valid pointer to writable memory for one `bool`.
#[no_mangle]
pub unsafe extern "C" fn mixcurv_run_overall_pass(
    run: *const MixcurvRun,
    out: *mut bool,
) -> MixcurvStatus {
    guard(|| {
        let Some(handle) = borrow_run(run) else {
            return fail(MixcurvStatus::NullPointer, "run is NULL".to_string());
        };
        if out.is_null() {
            return fail(MixcurvStatus::NullPointer, "out is NULL".to_string());
        }
        *out = handle.report.overall_pass;
        MixcurvStatus::Ok
    })
}

/// Writes the number of scenarios covered by the run.
///
/// # Safety
///
/// `run` must be a handle from [`mixcurv_run`] that has not been freed;
/// `out` must be a valid pointer to writable memory for one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn mixcurv_run_scenario_count(
    run: *const MixcurvRun,
    out: *mut usize,
) -> MixcurvStatus {
    guard(|| {
        let Some(handle) = borrow_run(run) else {
            return fail(MixcurvStatus::NullPointer, "run is NULL".to_string());
        };
        if out.is_null() {
            return fail(MixcurvStatus::NullPointer, "out is NULL".to_string());
        }
        *out = handle.report.scenarios.len();
        MixcurvStatus::Ok
    })
}

fn scenario_index_error(index: usize, len: usize) -> MixcurvStatus {
    fail(
        MixcurvStatus::InvalidArgument,
        format!("scenario index {index} out of range (run has {len})"),
    )
}

/// Writes the name of scenario `index` within the run to `out`; free
/// the string with [`mixcurv_string_free`].
///
/// # Safety
///
/// `run` must be a handle from [`mixcurv_run`] that has not been freed;
/// `out` must be a valid pointer to writable memory for one `char *`.
#[no_mangle]
pub unsafe extern "C" fn mixcurv_run_scenario_name(
    run: *const MixcurvRun,
    index: usize,
    out: *mut *mut c_char,
) -> MixcurvStatus {
    guard(|| {
        let Some(handle) = borrow_run(run) else {
            return fail(MixcurvStatus::NullPointer, "run is NULL".to_string());
        };
        if out.is_null() {
            return fail(MixcurvStatus::NullPointer, "out is NULL".to_string());
        }
        let scenarios = &handle.report.scenarios;
        match scenarios.get(index) {
            Some(s) => export_string(&s.name, out),
            None => scenario_index_error(index, scenarios.len()),
        }
    })
}

/// Writes whether scenario `index` within the run passed.
///
/// # Safety
///
/// `run` must be a handle from [`mixcurv_run`] that has not been freed;
/// `out` must be a valid pointer to writable memory for one `bool`.
#[no_mangle]
pub unsafe extern "C" fn mixcurv_run_scenario_pass(
    run: *const MixcurvRun,
    index: usize,
    out: *mut bool,
) -> MixcurvStatus {
    guard(|| {
        let Some(handle) = borrow_run(run) else {
            return fail(MixcurvStatus::NullPointer, "run is NULL".to_string());
        };
        if out.is_null() {
            return fail(MixcurvStatus::NullPointer, "out is NULL".to_string());
        }
        let scenarios = &handle.report.scenarios;
        match scenarios.get(index) {
            Some(s) => {
                *out = s.pass;
                MixcurvStatus::Ok
            }
            None => scenario_index_error(index, scenarios.len()),
        }
    })
}

/// Writes the full run report as pretty-printed JSON; free the string
/// with [`mixcurv_string_free`].
///
/// # Safety
///
/// `run` must be a handle from [`mixcurv_run`] that has not been freed;
/// `out` must be a valid pointer to writable memory for one `char *`.
#[no_mangle]
pub unsafe extern "C" fn mixcurv_run_report_json(
    run: *const MixcurvRun,
    out: *mut *mut c_char,
) -> MixcurvStatus {
    guard(|| {
        let Some(handle) = borrow_run(run) else {
            return fail(MixcurvStatus::NullPointer, "run is NULL".to_string());
        };
        if out.is_null() {
            return fail(MixcurvStatus::NullPointer, "out is NULL".to_string());
        }
        export_string(&handle.report.to_json(), out)
    })
}

/// Writes the run report as the human-readable table; free the string
/// with [`mixcurv_string_free`].
///
/// # Safety
///
/// `run` must be a handle from [`mixcurv_run`] that has not been freed;
/// `out` must be a valid pointer to writable memory for one `char *`.
#[no_mangle]
pub unsafe extern "C" fn mixcurv_run_report_text(
    run: *const MixcurvRun,
    out: *mut *mut c_char,
) -> MixcurvStatus {
    guard(|| {
        let Some(handle) = borrow_run(run) else {
            return fail(MixcurvStatus::NullPointer, "run is NULL".to_string());
        };
        if out.is_null() {
            return fail(MixcurvStatus::NullPointer, "out is NULL".to_string());
        }
        export_string(&handle.report.render_text(), out)
    })
}

/// Returns a heap copy of the most recent error message on this thread,
/// or NULL if no call has failed; free it with [`mixcurv_string_free`].
#[no_mangle]
pub extern "C" fn mixcurv_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Releases a string returned by this library; NULL is a no-op.
///
/// # Safety
///
/// `s` must be a string obtained from this library that has not already
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn mixcurv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Releases a run handle; NULL is a no-op.
///
/// # Safety
///
/// `run` must be a handle obtained from [`mixcurv_run`] that has not
/// already been freed.
#[no_mangle]
pub unsafe extern "C" fn mixcurv_run_free(run: *mut MixcurvRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
