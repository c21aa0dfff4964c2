//! C ABI over the condexp engine: opaque problem handles, integer status
//! codes mirroring the CLI exit codes, and caller-freed string results
//! carrying the same human-plus-machine output the CLI prints.
//!
//! Every entry point is panic-safe; a caught panic reports
//! `CONDEXP_INTERNAL`.

use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::c_char;

use condexp::commands::{
    cmd_check, dist_on, expect_on, gapfn_on, pp_expect_on, CommandOutput, RunOptions,
};
use condexp::problem::{Problem, ProblemError, BUDGET_ENV_VAR};

pub const CONDEXP_OK: i32 = 0;
pub const CONDEXP_INTERNAL: i32 = 1;
pub const CONDEXP_BUDGET_EXHAUSTED: i32 = 2;
pub const CONDEXP_INVALID: i32 = 3;
pub const CONDEXP_PARSE_ERROR: i32 = 4;
pub const CONDEXP_NULL_ARGUMENT: i32 = 5;

/// Opaque handle for a parsed and validated problem.
pub struct CondexpProblem {
    inner: Problem,
}

/// Run options; negative numeric fields mean "not set" (fall back to the
/// problem file, the `CONDEXP_BUDGET` environment variable, then the
/// built-in default).
#[repr(C)]
#[derive(Clone, Copy)]
pub struct CondexpRunOptions {
    pub precision: i64,
    pub budget: i64,
    pub audit: bool,
    pub exact: bool,
    pub parallel: bool,
}

fn options_from(opts: Option<&CondexpRunOptions>) -> RunOptions {
    let env_budget = std::env::var(BUDGET_ENV_VAR).ok().and_then(|s| s.parse().ok());
    let Some(o) = opts else {
        return RunOptions { env_budget, ..Default::default() };
    };
    RunOptions {
        precision: (o.precision >= 0).then(|| o.precision as u32),
        budget: (o.budget >= 0).then(|| o.budget as u64),
        audit: o.audit,
        exact: o.exact,
        parallel: o.parallel,
        env_budget,
    }
}

fn to_owned_c_string(s: String) -> *mut c_char {
    // interior NULs cannot round-trip through a C string; replace them
    let cleaned: String = s.chars().map(|c| if c == '\0' { '?' } else { c }).collect();
    CString::new(cleaned).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

fn write_out(out: *mut *mut c_char, text: String) {
    if !out.is_null() {
        unsafe { *out = to_owned_c_string(text) };
    }
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().ok()
}

fn deliver(output: CommandOutput, result_out: *mut *mut c_char) -> i32 {
    write_out(result_out, output.stdout);
    output.exit_code
}

fn guarded(result_out: *mut *mut c_char, f: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            write_out(result_out, "ERROR internal panic\n".to_string());
            CONDEXP_INTERNAL
        }
    }
}

/// Default-initialized options (all fields unset).
#[no_mangle]
pub extern "C" fn condexp_run_options_default() -> CondexpRunOptions {
    CondexpRunOptions { precision: -1, budget: -1, audit: false, exact: false, parallel: false }
}

/// Parse and validate a problem file. Returns a handle, or NULL with an
/// error message in `error_out` (free it with `condexp_string_free`). The
/// status code distinguishing parse from validation failures is written to
/// `status_out` when non-NULL.
///
/// # Safety
/// `toml_text` must be a valid NUL-terminated UTF-8 string; the out
/// pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn condexp_problem_parse(
    toml_text: *const c_char,
    status_out: *mut i32,
    error_out: *mut *mut c_char,
) -> *mut CondexpProblem {
    let set_status = |code: i32| {
        if !status_out.is_null() {
            unsafe { *status_out = code };
        }
    };
    let Some(text) = (unsafe { read_str(toml_text) }) else {
        set_status(CONDEXP_NULL_ARGUMENT);
        write_out(error_out, "null or non-UTF-8 problem text\n".to_string());
        return ptr::null_mut();
    };
    let parsed = catch_unwind(AssertUnwindSafe(|| Problem::load(text)));
    match parsed {
        Ok(Ok(problem)) => {
            set_status(CONDEXP_OK);
            Box::into_raw(Box::new(CondexpProblem { inner: problem }))
        }
        Ok(Err(e)) => {
            let code = match &e {
                ProblemError::Parse(_) => CONDEXP_PARSE_ERROR,
                ProblemError::Invalid { .. } => CONDEXP_INVALID,
            };
            set_status(code);
            write_out(error_out, format!("{e}\n"));
            ptr::null_mut()
        }
        Err(_) => {
            set_status(CONDEXP_INTERNAL);
            write_out(error_out, "internal panic\n".to_string());
            ptr::null_mut()
        }
    }
}

/// Free a problem handle. NULL is ignored.
///
/// # Safety
/// `p` must come from `condexp_problem_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn condexp_problem_free(p: *mut CondexpProblem) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Free a string returned by any entry point. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn condexp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Validate a problem file; the per-invariant report is written to
/// `result_out`.
///
/// # Safety
/// See `condexp_problem_parse`.
#[no_mangle]
pub unsafe extern "C" fn condexp_check(
    toml_text: *const c_char,
    result_out: *mut *mut c_char,
) -> i32 {
    let Some(text) = (unsafe { read_str(toml_text) }) else {
        write_out(result_out, "ERROR null or non-UTF-8 problem text\n".to_string());
        return CONDEXP_NULL_ARGUMENT;
    };
    guarded(result_out, || deliver(cmd_check(text), result_out))
}

macro_rules! handle_command {
    ($name:ident, $impl_fn:path, $doc:literal) => {
        #[doc = $doc]
        ///
        /// # Safety
        /// `p` must be a live handle from `condexp_problem_parse`; `opts`
        /// and `result_out` may be NULL.
        #[no_mangle]
        pub unsafe extern "C" fn $name(
            p: *const CondexpProblem,
            opts: *const CondexpRunOptions,
            result_out: *mut *mut c_char,
        ) -> i32 {
            if p.is_null() {
                write_out(result_out, "ERROR null problem handle\n".to_string());
                return CONDEXP_NULL_ARGUMENT;
            }
            let problem = unsafe { &(*p).inner };
            let options = options_from(unsafe { opts.as_ref() });
            guarded(result_out, || deliver($impl_fn(problem, &options), result_out))
        }
    };
}

handle_command!(
    condexp_dist,
    dist_on,
    "Certified distance from the target to the subalgebra (interleaved search)."
);
handle_command!(condexp_expect, expect_on, "Conditional expectation of the target.");
handle_command!(
    condexp_pp_expect,
    pp_expect_on,
    "Conditional expectation through the declared reconstruction basis."
);
handle_command!(
    condexp_gapfn,
    gapfn_on,
    "Tabulate the spectral gap function derived from the Kazhdan data."
);

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    const PROBLEM: &str = include_str!("../../../problems/tensor.toml");

    fn take_string(p: *mut c_char) -> String {
        assert!(!p.is_null());
        let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
        unsafe { condexp_string_free(p) };
        s
    }

    #[test]
    fn parse_run_free_lifecycle() {
        let text = CString::new(PROBLEM).unwrap();
        let mut status = -1;
        let mut err: *mut c_char = ptr::null_mut();
        let handle = unsafe { condexp_problem_parse(text.as_ptr(), &mut status, &mut err) };
        assert_eq!(status, CONDEXP_OK);
        assert!(!handle.is_null());
        assert!(err.is_null());

        let opts = condexp_run_options_default();
        let mut out: *mut c_char = ptr::null_mut();
        let code = unsafe { condexp_dist(handle, &opts, &mut out) };
        assert_eq!(code, CONDEXP_OK);
        let text_out = take_string(out);
        assert!(text_out.contains("RESULT status=certified"), "{text_out}");

        let mut out: *mut c_char = ptr::null_mut();
        let code = unsafe { condexp_gapfn(handle, &opts, &mut out) };
        assert_eq!(code, CONDEXP_OK);
        assert!(take_string(out).contains("GAPFN n=0"));

        unsafe { condexp_problem_free(handle) };
    }

    #[test]
    fn parse_failure_reports_code_and_message() {
        let text = CString::new("precision = [nope").unwrap();
        let mut status = -1;
        let mut err: *mut c_char = ptr::null_mut();
        let handle = unsafe { condexp_problem_parse(text.as_ptr(), &mut status, &mut err) };
        assert!(handle.is_null());
        assert_eq!(status, CONDEXP_PARSE_ERROR);
        assert!(take_string(err).contains("parse error"));

        let bad = PROBLEM.replace("weight = \"1/4\"", "weight = \"1/3\"");
        let text = CString::new(bad).unwrap();
        let handle = unsafe { condexp_problem_parse(text.as_ptr(), &mut status, &mut err) };
        assert!(handle.is_null());
        assert_eq!(status, CONDEXP_INVALID);
        unsafe { condexp_string_free(err) };
    }

    #[test]
    fn null_arguments_are_rejected() {
        let mut out: *mut c_char = ptr::null_mut();
        let code = unsafe { condexp_dist(ptr::null(), ptr::null(), &mut out) };
        assert_eq!(code, CONDEXP_NULL_ARGUMENT);
        unsafe { condexp_string_free(out) };
        let code = unsafe { condexp_check(ptr::null(), &mut out) };
        assert_eq!(code, CONDEXP_NULL_ARGUMENT);
        unsafe { condexp_string_free(out) };
    }

    #[test]
    fn check_over_text() {
        let text = CString::new(PROBLEM).unwrap();
        let mut out: *mut c_char = ptr::null_mut();
        let code = unsafe { condexp_check(text.as_ptr(), &mut out) };
        assert_eq!(code, CONDEXP_OK);
        assert!(take_string(out).contains("RESULT status=ok"));
    }

    #[test]
    fn budget_exhaustion_code() {
        let text = CString::new(PROBLEM).unwrap();
        let handle =
            unsafe { condexp_problem_parse(text.as_ptr(), ptr::null_mut(), ptr::null_mut()) };
        let mut opts = condexp_run_options_default();
        opts.budget = 0;
        let mut out: *mut c_char = ptr::null_mut();
        let code = unsafe { condexp_dist(handle, &opts, &mut out) };
        assert_eq!(code, CONDEXP_BUDGET_EXHAUSTED);
        assert!(take_string(out).contains("status=budget-exhausted"));
        unsafe { condexp_problem_free(handle) };
    }
}
