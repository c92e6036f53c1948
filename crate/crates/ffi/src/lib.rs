//! C ABI over the experiment driver: opaque handles for configurations and
//! run reports, integer error codes, and a thread-local last-error message.
//!
//! Ownership rules: every `*_new`/`*_from_*`/`cdlab_run` pointer must be
//! released with the matching `*_free`; strings returned as `char*` must be
//! released with `cdlab_string_free`. Handles are not thread-safe; the
//! last-error buffer is per thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use cdlab::experiments::{self, ExperimentConfig, RunReport};
use cdlab::CdError;

pub const CDLAB_OK: i32 = 0;
pub const CDLAB_ERR_ARGUMENT: i32 = 1;
pub const CDLAB_ERR_CONFIG: i32 = 2;
pub const CDLAB_ERR_NUMERIC: i32 = 3;
pub const CDLAB_ERR_IO: i32 = 4;
pub const CDLAB_ERR_PANIC: i32 = 5;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap());
}

fn code_of(err: &CdError) -> i32 {
    match err {
        CdError::Config(_) => CDLAB_ERR_CONFIG,
        CdError::InvalidArgument(_) | CdError::Precondition(_) | CdError::OutsideAperture(_) => {
            CDLAB_ERR_ARGUMENT
        }
        CdError::Solver(_) => CDLAB_ERR_NUMERIC,
        CdError::Io(_) | CdError::Serde(_) => CDLAB_ERR_IO,
    }
}

/// Opaque experiment configuration.
pub struct CdlabConfig(ExperimentConfig);

/// Opaque run report.
pub struct CdlabReport(RunReport);

/// Message of the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cdlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static library version string.
#[no_mangle]
pub extern "C" fn cdlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// JSON array of {name, description} scenario entries; free with
/// `cdlab_string_free`.
#[no_mangle]
pub extern "C" fn cdlab_scenarios_json() -> *mut c_char {
    let list: Vec<serde_json::Value> = experiments::list_scenarios()
        .into_iter()
        .map(|(n, d)| serde_json::json!({"name": n, "description": d}))
        .collect();
    CString::new(serde_json::to_string(&list).unwrap())
        .unwrap()
        .into_raw()
}

#[no_mangle]
pub extern "C" fn cdlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        unsafe {
            drop(CString::from_raw(s));
        }
    }
}

unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, i32> {
    if ptr.is_null() {
        set_error(&format!("{what} is null"));
        return Err(CDLAB_ERR_ARGUMENT);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        CDLAB_ERR_ARGUMENT
    })
}

/// Default configuration for a named scenario; null on error.
#[no_mangle]
pub unsafe extern "C" fn cdlab_config_default(scenario: *const c_char) -> *mut CdlabConfig {
    let Ok(name) = read_str(scenario, "scenario") else {
        return std::ptr::null_mut();
    };
    Box::into_raw(Box::new(CdlabConfig(ExperimentConfig::default_for(name))))
}

/// Parse a JSON configuration; null on error (see `cdlab_last_error`).
#[no_mangle]
pub unsafe extern "C" fn cdlab_config_from_json(json: *const c_char) -> *mut CdlabConfig {
    let Ok(text) = read_str(json, "config JSON") else {
        return std::ptr::null_mut();
    };
    match ExperimentConfig::from_json(text) {
        Ok(cfg) => Box::into_raw(Box::new(CdlabConfig(cfg))),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

#[no_mangle]
pub unsafe extern "C" fn cdlab_config_free(cfg: *mut CdlabConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Canonical JSON of the configuration; free with `cdlab_string_free`.
#[no_mangle]
pub unsafe extern "C" fn cdlab_config_to_json(cfg: *const CdlabConfig) -> *mut c_char {
    if cfg.is_null() {
        set_error("config handle is null");
        return std::ptr::null_mut();
    }
    let text = serde_json::to_string_pretty(&(*cfg).0).unwrap();
    CString::new(text).unwrap().into_raw()
}

/// Number of validation diagnostics (0 means the config is runnable);
/// negative on argument errors. The diagnostics themselves are exposed as a
/// JSON array via `cdlab_config_diagnostics_json`.
#[no_mangle]
pub unsafe extern "C" fn cdlab_config_validate(cfg: *const CdlabConfig) -> i32 {
    if cfg.is_null() {
        set_error("config handle is null");
        return -CDLAB_ERR_ARGUMENT;
    }
    experiments::validate(&(*cfg).0).len() as i32
}

/// JSON array of validation diagnostics; free with `cdlab_string_free`.
#[no_mangle]
pub unsafe extern "C" fn cdlab_config_diagnostics_json(cfg: *const CdlabConfig) -> *mut c_char {
    if cfg.is_null() {
        set_error("config handle is null");
        return std::ptr::null_mut();
    }
    let diags = experiments::validate(&(*cfg).0);
    CString::new(serde_json::to_string(&diags).unwrap())
        .unwrap()
        .into_raw()
}

/// Run the configured scenario; null on error (code retrievable by running
/// `cdlab_run_code`, message via `cdlab_last_error`).
#[no_mangle]
pub unsafe extern "C" fn cdlab_run(cfg: *const CdlabConfig) -> *mut CdlabReport {
    if cfg.is_null() {
        set_error("config handle is null");
        return std::ptr::null_mut();
    }
    let config = (*cfg).0.clone();
    let outcome = catch_unwind(AssertUnwindSafe(|| experiments::run(&config)));
    match outcome {
        Ok(Ok(report)) => Box::into_raw(Box::new(CdlabReport(report))),
        Ok(Err(e)) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
        Err(_) => {
            set_error("internal panic during scenario execution");
            std::ptr::null_mut()
        }
    }
}

/// Run and report only the status code: CDLAB_OK when every check passed,
/// otherwise the error class of the failure (checks that ran but failed
/// still return CDLAB_OK; inspect the report for their status).
#[no_mangle]
pub unsafe extern "C" fn cdlab_run_code(cfg: *const CdlabConfig) -> i32 {
    if cfg.is_null() {
        set_error("config handle is null");
        return CDLAB_ERR_ARGUMENT;
    }
    let config = (*cfg).0.clone();
    match catch_unwind(AssertUnwindSafe(|| experiments::run(&config))) {
        Ok(Ok(_)) => CDLAB_OK,
        Ok(Err(e)) => {
            set_error(&e.to_string());
            code_of(&e)
        }
        Err(_) => {
            set_error("internal panic during scenario execution");
            CDLAB_ERR_PANIC
        }
    }
}

#[no_mangle]
pub unsafe extern "C" fn cdlab_report_free(report: *mut CdlabReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// 1 when every check passed, 0 otherwise, negative on argument errors.
#[no_mangle]
pub unsafe extern "C" fn cdlab_report_passed(report: *const CdlabReport) -> i32 {
    if report.is_null() {
        set_error("report handle is null");
        return -CDLAB_ERR_ARGUMENT;
    }
    (*report).0.passed as i32
}

/// Number of checks in the report; negative on argument errors.
#[no_mangle]
pub unsafe extern "C" fn cdlab_report_check_count(report: *const CdlabReport) -> i32 {
    if report.is_null() {
        set_error("report handle is null");
        return -CDLAB_ERR_ARGUMENT;
    }
    (*report).0.checks.len() as i32
}

/// Full report as JSON; free with `cdlab_string_free`.
#[no_mangle]
pub unsafe extern "C" fn cdlab_report_to_json(report: *const CdlabReport) -> *mut c_char {
    if report.is_null() {
        set_error("report handle is null");
        return std::ptr::null_mut();
    }
    CString::new((*report).0.to_json()).unwrap().into_raw()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    unsafe fn take_string(p: *mut c_char) -> String {
        assert!(!p.is_null());
        let s = CStr::from_ptr(p).to_str().unwrap().to_string();
        cdlab_string_free(p);
        s
    }

    #[test]
    fn version_and_scenarios_are_exposed() {
        unsafe {
            let v = CStr::from_ptr(cdlab_version()).to_str().unwrap();
            assert!(!v.is_empty());
            let list = take_string(cdlab_scenarios_json());
            let parsed: serde_json::Value = serde_json::from_str(&list).unwrap();
            assert!(parsed.as_array().unwrap().len() >= 7);
        }
    }

    #[test]
    fn null_and_invalid_inputs_set_the_last_error() {
        unsafe {
            assert!(cdlab_config_from_json(std::ptr::null()).is_null());
            let msg = CStr::from_ptr(cdlab_last_error()).to_str().unwrap();
            assert!(msg.contains("null"), "{msg}");

            let bad = cstr("{ not json");
            assert!(cdlab_config_from_json(bad.as_ptr()).is_null());
            let msg = CStr::from_ptr(cdlab_last_error()).to_str().unwrap();
            assert!(msg.contains("malformed config"), "{msg}");

            assert_eq!(cdlab_config_validate(std::ptr::null()), -CDLAB_ERR_ARGUMENT);
        }
    }

    #[test]
    fn config_round_trips_and_validates() {
        unsafe {
            let name = cstr("carleman");
            let cfg = cdlab_config_default(name.as_ptr());
            assert!(!cfg.is_null());
            assert_eq!(cdlab_config_validate(cfg), 0);
            let json = take_string(cdlab_config_to_json(cfg));
            let cfg2 = {
                let c = cstr(&json);
                cdlab_config_from_json(c.as_ptr())
            };
            assert!(!cfg2.is_null());
            assert_eq!(cdlab_config_validate(cfg2), 0);
            cdlab_config_free(cfg);
            cdlab_config_free(cfg2);
        }
    }

    #[test]
    fn invalid_config_reports_diagnostics_and_a_config_error() {
        unsafe {
            let cfg = {
                let c = cstr("{}");
                cdlab_config_from_json(c.as_ptr())
            };
            assert!(!cfg.is_null());
            assert!(cdlab_config_validate(cfg) > 0);
            let diags = take_string(cdlab_config_diagnostics_json(cfg));
            assert!(diags.contains("unknown scenario"), "{diags}");
            assert!(cdlab_run(cfg).is_null());
            assert_eq!(cdlab_run_code(cfg), CDLAB_ERR_CONFIG);
            cdlab_config_free(cfg);
        }
    }

    #[test]
    fn a_small_scenario_runs_through_the_abi() {
        unsafe {
            let cfg = {
                let c = cstr(
                    r#"{"scenario":"q-recovery","grid":{"n_nodes":17,"m_steps":8},"cone":{"directions":3}}"#,
                );
                cdlab_config_from_json(c.as_ptr())
            };
            assert!(!cfg.is_null());
            assert_eq!(cdlab_config_validate(cfg), 0);
            let report = cdlab_run(cfg);
            assert!(!report.is_null(), "{:?}", CStr::from_ptr(cdlab_last_error()));
            assert_eq!(cdlab_report_passed(report), 1);
            assert!(cdlab_report_check_count(report) >= 3);
            let json = take_string(cdlab_report_to_json(report));
            assert!(json.contains("single-mode-exact"), "{json}");
            cdlab_report_free(report);
            cdlab_config_free(cfg);
        }
    }
}
