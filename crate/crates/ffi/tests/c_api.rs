use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use inductor_ffi::*;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { inductor_string_free(s) };
    out
}

fn last_error() -> String {
    let p = inductor_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn program_round_trip() {
    let src = CString::new("slice(xs, 1, len(xs) - 2)").unwrap();
    let mut prog = ptr::null_mut();
    assert_eq!(unsafe { inductor_program_parse(src.as_ptr(), &mut prog) }, InductorStatus::Ok);
    let input = CString::new("[9, 7, 1, 8, 2, 3]").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { inductor_program_eval(prog, input.as_ptr(), 0, &mut out) }, InductorStatus::Ok);
    assert_eq!(take(out), "[7,1,8]");
    unsafe { inductor_program_free(prog) };
}

#[test]
fn grid_inputs_are_recognised() {
    let src = CString::new("transpose(g)").unwrap();
    let mut prog = ptr::null_mut();
    assert_eq!(unsafe { inductor_program_parse(src.as_ptr(), &mut prog) }, InductorStatus::Ok);
    let input = CString::new("[[1, 2], [3, 4]]").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { inductor_program_eval(prog, input.as_ptr(), 0, &mut out) }, InductorStatus::Ok);
    assert_eq!(take(out), "[[1,3],[2,4]]");
    unsafe { inductor_program_free(prog) };
}

#[test]
fn errors_set_status_and_message() {
    let bad = CString::new("slice(xs, ").unwrap();
    let mut prog = ptr::null_mut();
    assert_eq!(unsafe { inductor_program_parse(bad.as_ptr(), &mut prog) }, InductorStatus::SyntaxError);
    assert!(prog.is_null());
    assert!(!last_error().is_empty());

    let src = CString::new("map(xs, fn(x) x / 0)").unwrap();
    assert_eq!(unsafe { inductor_program_parse(src.as_ptr(), &mut prog) }, InductorStatus::Ok);
    let input = CString::new("[1]").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { inductor_program_eval(prog, input.as_ptr(), 0, &mut out) }, InductorStatus::EvalError);
    assert!(last_error().contains("division"), "{}", last_error());
    let not_json = CString::new("[1,").unwrap();
    assert_eq!(
        unsafe { inductor_program_eval(prog, not_json.as_ptr(), 0, &mut out) },
        InductorStatus::InvalidArgument
    );
    unsafe { inductor_program_free(prog) };

    assert_eq!(unsafe { inductor_program_parse(ptr::null(), &mut prog) }, InductorStatus::NullPointer);
    unsafe { inductor_program_free(ptr::null_mut()) };
    unsafe { inductor_string_free(ptr::null_mut()) };
}

#[test]
fn step_budget_is_honoured() {
    let src = CString::new("map(xs, fn(x) x + 1)").unwrap();
    let mut prog = ptr::null_mut();
    assert_eq!(unsafe { inductor_program_parse(src.as_ptr(), &mut prog) }, InductorStatus::Ok);
    let input = CString::new(format!("{:?}", vec![1; 200])).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { inductor_program_eval(prog, input.as_ptr(), 10, &mut out) }, InductorStatus::EvalError);
    assert_eq!(unsafe { inductor_program_eval(prog, input.as_ptr(), 0, &mut out) }, InductorStatus::Ok);
    take(out);
    unsafe { inductor_program_free(prog) };
}

#[test]
fn grammar_handles() {
    let text = CString::new("Rule 1: siun -> BLUE\nPriority 1: 2\nRule 2: ##A mcneilt -> ##A ##A ##A\nPriority 2: 1").unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { inductor_grammar_parse(text.as_ptr(), &mut g) }, InductorStatus::Ok);
    let input = CString::new("siun mcneilt").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { inductor_grammar_derive(g, input.as_ptr(), &mut out) }, InductorStatus::Ok);
    assert_eq!(take(out), "BLUE BLUE BLUE");
    let unknown = CString::new("zup").unwrap();
    assert_eq!(unsafe { inductor_grammar_derive(g, unknown.as_ptr(), &mut out) }, InductorStatus::DeriveError);
    unsafe { inductor_grammar_free(g) };

    let bad = CString::new("Rule 1: ##A ##A -> ##A twice\nPriority 1: 1").unwrap();
    assert_eq!(unsafe { inductor_grammar_parse(bad.as_ptr(), &mut g) }, InductorStatus::GrammarError);
}

#[test]
fn blicket_and_aggregate() {
    let rule = CString::new(r#"Rule: {"blue rubber sphere": "on", "red metal cube": "off"}"#).unwrap();
    let objects = CString::new(r#"["blue rubber sphere"]"#).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { inductor_blicket_apply(rule.as_ptr(), objects.as_ptr(), &mut out) }, InductorStatus::Ok);
    assert_eq!(take(out), "on");

    let a = [1.0, 0.75, 1.0];
    let (mut c, mut ct) = (0.0, 0.0);
    assert_eq!(unsafe { inductor_aggregate(a.as_ptr(), a.len(), &mut c, &mut ct) }, InductorStatus::Ok);
    assert_eq!(c, 2.75 / 3.0);
    assert_eq!(ct, 2.0 / 3.0);
    assert_eq!(unsafe { inductor_aggregate(a.as_ptr(), 0, &mut c, &mut ct) }, InductorStatus::InvalidArgument);
    let v = unsafe { CStr::from_ptr(inductor_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export_and_compiles_as_c() {
    let header_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/inductor.h");
    let header = std::fs::read_to_string(&header_path).unwrap();
    for name in [
        "inductor_last_error",
        "inductor_string_free",
        "inductor_program_parse",
        "inductor_program_eval",
        "inductor_program_free",
        "inductor_grammar_parse",
        "inductor_grammar_derive",
        "inductor_grammar_free",
        "inductor_blicket_apply",
        "inductor_aggregate",
        "inductor_version",
        "typedef struct InductorProgram InductorProgram",
        "INDUCTOR_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    let dir = tempfile_dir();
    let probe = dir.join("probe.c");
    std::fs::write(&probe, "#include \"inductor.h\"\nint main(void) { return inductor_version() == 0; }\n").unwrap();
    match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(header_path.parent().unwrap())
        .arg(&probe)
        .status()
    {
        Ok(status) => assert!(status.success(), "header does not compile as C"),
        Err(_) => eprintln!("no C compiler found; skipped compile check"),
    }
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("inductor-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
