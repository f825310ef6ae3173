//! C interface to the sandbox evaluator, the grammar interpreter, the blicket
//! interpreter and the accuracy metrics.
//!
//! Every fallible call returns an [`InductorStatus`]. On failure, a message is
//! kept per thread and can be read with [`inductor_last_error`]. Strings
//! returned through out-parameters are owned by the caller and must be
//! released with [`inductor_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use inductor::blicket::{apply_blicket, parse_blicket_rule};
use inductor::model::{value_from_json, value_to_json, Side, TaskKind, Value};
use inductor::qcfg::{parse_grammar, Grammar};
use inductor::sandbox::{eval_program, parse_program, Limits, Program};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InductorStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    SyntaxError = 4,
    EvalError = 5,
    GrammarError = 6,
    DeriveError = 7,
    RuleError = 8,
    Panic = 9,
}

/// A parsed sandbox program.
pub struct InductorProgram {
    program: Program,
}

/// A parsed, validated grammar.
pub struct InductorGrammar {
    grammar: Grammar,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

fn fail(status: InductorStatus, msg: impl Into<String>) -> InductorStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> InductorStatus) -> InductorStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(InductorStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, InductorStatus> {
    if p.is_null() {
        return Err(fail(InductorStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(InductorStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> InductorStatus {
    let c = match CString::new(s) {
        Ok(c) => c,
        Err(_) => return fail(InductorStatus::InvalidArgument, "result contains a nul byte"),
    };
    *out = c.into_raw();
    InductorStatus::Ok
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn inductor_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn inductor_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse sandbox source into a program handle.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn inductor_program_parse(source: *const c_char, out: *mut *mut InductorProgram) -> InductorStatus {
    guard(|| {
        if out.is_null() {
            return fail(InductorStatus::NullPointer, "out is null");
        }
        let src = try_ffi!(read_str(source, "source"));
        match parse_program(src) {
            Ok(program) => {
                *out = Box::into_raw(Box::new(InductorProgram { program }));
                InductorStatus::Ok
            }
            Err(e) => fail(InductorStatus::SyntaxError, e.to_string()),
        }
    })
}

/// Run a program on a JSON input: an integer array, or an array of integer
/// rows for a grid. `max_steps` of 0 keeps the default budget. On success
/// `*out_json` receives the result as JSON.
///
/// # Safety
/// `program` must be a live handle; `input_json` NUL-terminated; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn inductor_program_eval(
    program: *const InductorProgram,
    input_json: *const c_char,
    max_steps: u64,
    out_json: *mut *mut c_char,
) -> InductorStatus {
    guard(|| {
        if program.is_null() || out_json.is_null() {
            return fail(InductorStatus::NullPointer, "program or out_json is null");
        }
        let text = try_ffi!(read_str(input_json, "input_json"));
        let json: serde_json::Value = match serde_json::from_str(text) {
            Ok(j) => j,
            Err(e) => return fail(InductorStatus::InvalidArgument, format!("input is not JSON: {e}")),
        };
        let is_grid = json.as_array().and_then(|a| a.first()).is_some_and(serde_json::Value::is_array);
        let kind = if is_grid { TaskKind::MiniArc } else { TaskKind::ListFn };
        let input: Value = match value_from_json(&json, kind, Side::In) {
            Ok(v) => v,
            Err(e) => return fail(InductorStatus::InvalidArgument, e),
        };
        let mut limits = Limits::default();
        if max_steps > 0 {
            limits.max_steps = max_steps;
        }
        match eval_program(&(*program).program, &input, &limits) {
            Ok(v) => write_string(out_json, value_to_json(&v).to_string()),
            Err(e) => fail(InductorStatus::EvalError, e.to_string()),
        }
    })
}

/// # Safety
/// `program` must be NULL or a handle from [`inductor_program_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn inductor_program_free(program: *mut InductorProgram) {
    if !program.is_null() {
        drop(Box::from_raw(program));
    }
}

/// Parse a `Rule k:` / `Priority k:` grammar.
///
/// # Safety
/// `text` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn inductor_grammar_parse(text: *const c_char, out: *mut *mut InductorGrammar) -> InductorStatus {
    guard(|| {
        if out.is_null() {
            return fail(InductorStatus::NullPointer, "out is null");
        }
        let src = try_ffi!(read_str(text, "text"));
        match parse_grammar(src) {
            Ok(grammar) => {
                *out = Box::into_raw(Box::new(InductorGrammar { grammar }));
                InductorStatus::Ok
            }
            Err(e) => fail(InductorStatus::GrammarError, e.to_string()),
        }
    })
}

/// Translate a space-separated input; `*out` receives the space-separated output.
///
/// # Safety
/// `grammar` must be a live handle; `input` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn inductor_grammar_derive(
    grammar: *const InductorGrammar,
    input: *const c_char,
    out: *mut *mut c_char,
) -> InductorStatus {
    guard(|| {
        if grammar.is_null() || out.is_null() {
            return fail(InductorStatus::NullPointer, "grammar or out is null");
        }
        let text = try_ffi!(read_str(input, "input"));
        let tokens: Vec<String> = text.split_whitespace().map(str::to_owned).collect();
        match (*grammar).grammar.derive(&tokens) {
            Ok(words) => write_string(out, words.join(" ")),
            Err(e) => fail(InductorStatus::DeriveError, e.to_string()),
        }
    })
}

/// # Safety
/// `grammar` must be NULL or a handle from [`inductor_grammar_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn inductor_grammar_free(grammar: *mut InductorGrammar) {
    if !grammar.is_null() {
        drop(Box::from_raw(grammar));
    }
}

/// Apply a blicket rule (a JSON object of object labels, possibly inside
/// prose) to a JSON array of object descriptions. `*out_label` receives
/// "on", "off" or "undetermined".
///
/// # Safety
/// Both strings must be NUL-terminated; `out_label` writable.
#[no_mangle]
pub unsafe extern "C" fn inductor_blicket_apply(
    rule: *const c_char,
    objects_json: *const c_char,
    out_label: *mut *mut c_char,
) -> InductorStatus {
    guard(|| {
        if out_label.is_null() {
            return fail(InductorStatus::NullPointer, "out_label is null");
        }
        let rule_text = try_ffi!(read_str(rule, "rule"));
        let objects_text = try_ffi!(read_str(objects_json, "objects_json"));
        let parsed = match parse_blicket_rule(rule_text) {
            Ok(r) => r,
            Err(e) => return fail(InductorStatus::RuleError, e.to_string()),
        };
        let objects: Vec<String> = match serde_json::from_str(objects_text) {
            Ok(o) => o,
            Err(e) => return fail(InductorStatus::InvalidArgument, format!("objects: {e}")),
        };
        write_string(out_label, apply_blicket(&parsed, &objects).as_str().to_owned())
    })
}

/// Raw accuracy (mean) and task accuracy (fraction equal to 1) over `len`
/// per-task accuracies.
///
/// # Safety
/// `a_tau` must point to `len` doubles; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn inductor_aggregate(
    a_tau: *const f64,
    len: usize,
    out_raw: *mut f64,
    out_task: *mut f64,
) -> InductorStatus {
    guard(|| {
        if a_tau.is_null() || out_raw.is_null() || out_task.is_null() {
            return fail(InductorStatus::NullPointer, "null argument");
        }
        if len == 0 {
            return fail(InductorStatus::InvalidArgument, "no tasks");
        }
        let xs = std::slice::from_raw_parts(a_tau, len);
        if let Some(bad) = xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return fail(InductorStatus::InvalidArgument, format!("accuracy {bad} outside [0, 1]"));
        }
        *out_raw = xs.iter().sum::<f64>() / len as f64;
        *out_task = xs.iter().filter(|&&x| x == 1.0).count() as f64 / len as f64;
        InductorStatus::Ok
    })
}

/// Library version, static.
#[no_mangle]
pub extern "C" fn inductor_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
