use std::ffi::{c_char, CStr, CString};
use std::ptr;

use dyelim_ffi::*;

const SEQ: &str = r#"{"family": "lacunary", "d": 1, "p": "inf", "params": {"base": "2"}, "count": 10}"#;

fn cfg() -> String {
    format!(r#"{{"sequence": {SEQ}, "schedule": {{"source": "theorem1", "N": 1}}, "n_max": 10}}"#)
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_owned();
    dyelim_string_free(p);
    s
}

unsafe fn last_error() -> String {
    CStr::from_ptr(dyelim_last_error()).to_str().unwrap().to_owned()
}

unsafe fn build_seq(json: &str) -> *mut DyelimSequence {
    let mut seq = ptr::null_mut();
    assert_eq!(dyelim_sequence_from_json(c(json).as_ptr(), 0, &mut seq), DyelimStatus::Ok);
    seq
}

unsafe fn construct() -> *mut DyelimCertificate {
    let mut cert = ptr::null_mut();
    let st = dyelim_construct(c(&cfg()).as_ptr(), &mut cert);
    assert_eq!(st, DyelimStatus::Ok, "{}", last_error());
    cert
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(dyelim_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn sequence_handle_reports_shape() {
    unsafe {
        let seq = build_seq(SEQ);
        assert_eq!(dyelim_sequence_len(seq), 10);
        assert_eq!(dyelim_sequence_dim(seq), 1);
        dyelim_sequence_free(seq);
        assert_eq!(dyelim_sequence_len(ptr::null()), 0);
        dyelim_sequence_free(ptr::null_mut());
    }
}

#[test]
fn malformed_inputs_map_to_statuses() {
    unsafe {
        let mut seq = ptr::null_mut();
        assert_eq!(dyelim_sequence_from_json(ptr::null(), 0, &mut seq), DyelimStatus::NullPointer);
        assert!(last_error().contains("NULL"));
        assert_eq!(dyelim_sequence_from_json(c("{").as_ptr(), 0, &mut seq), DyelimStatus::Usage);
        assert!(seq.is_null());
        let bad = [0xffu8, 0];
        assert_eq!(
            dyelim_sequence_from_json(bad.as_ptr().cast(), 0, &mut seq),
            DyelimStatus::InvalidUtf8
        );
        let (mut lo, mut hi) = (0.0, 0.0);
        let st = dyelim_bound(3, 1, 1, 0, &mut lo, &mut hi, ptr::null_mut());
        assert_eq!(st, DyelimStatus::Usage);
        let st = dyelim_bound(1, 0, 1, 0, &mut lo, &mut hi, ptr::null_mut());
        assert_eq!(st, DyelimStatus::Usage);
    }
}

#[test]
fn bound_encloses_known_constant() {
    unsafe {
        let (mut lo, mut hi) = (0.0, 0.0);
        let mut doc = ptr::null_mut();
        assert_eq!(dyelim_bound(1, 1, 1, 0, &mut lo, &mut hi, &mut doc), DyelimStatus::Ok);
        assert!(lo <= hi);
        assert!((lo - 0.0093715010046).abs() < 1e-10, "{lo}");
        let doc: serde_json::Value = serde_json::from_str(&take(doc)).unwrap();
        assert!(doc.is_object());
    }
}

#[test]
fn measure_matches_hand_count() {
    unsafe {
        let mut out = ptr::null_mut();
        let st = dyelim_measure_1d(
            c("3").as_ptr(),
            c("0").as_ptr(),
            c("1/8").as_ptr(),
            c("0").as_ptr(),
            c("1").as_ptr(),
            &mut out,
        );
        assert_eq!(st, DyelimStatus::Ok);
        assert_eq!(take(out), "1/4");
        let st = dyelim_measure_1d(
            c("0").as_ptr(),
            c("0").as_ptr(),
            c("1/8").as_ptr(),
            c("0").as_ptr(),
            c("1").as_ptr(),
            &mut out,
        );
        assert_eq!(st, DyelimStatus::Usage);
    }
}

#[test]
fn construct_verify_round_trip() {
    unsafe {
        let cert = construct();
        let seq = build_seq(SEQ);
        let mut report = ptr::null_mut();
        assert_eq!(dyelim_verify(cert, seq, &mut report), DyelimStatus::Ok);
        assert!(take(report).contains("\"pass\":true"));

        let mut json = ptr::null_mut();
        assert_eq!(dyelim_certificate_to_json(cert, &mut json), DyelimStatus::Ok);
        let json = take(json);
        let mut digest = ptr::null_mut();
        assert_eq!(dyelim_certificate_digest(cert, &mut digest), DyelimStatus::Ok);
        let digest = take(digest);
        assert_eq!(digest.len(), 64);

        let mut again = ptr::null_mut();
        assert_eq!(dyelim_certificate_from_json(c(&json).as_ptr(), &mut again), DyelimStatus::Ok);
        let mut json2 = ptr::null_mut();
        dyelim_certificate_to_json(again, &mut json2);
        assert_eq!(take(json2), json);

        dyelim_certificate_free(again);
        dyelim_certificate_free(cert);
        dyelim_sequence_free(seq);
    }
}

#[test]
fn verify_rejects_other_sequence() {
    unsafe {
        let cert = construct();
        let other = build_seq(&SEQ.replace("\"2\"", "\"3\""));
        let st = dyelim_verify(cert, other, ptr::null_mut());
        assert_eq!(st, DyelimStatus::Verify);
        assert!(!last_error().is_empty());
        dyelim_certificate_free(cert);
        dyelim_sequence_free(other);
    }
}

#[test]
fn infeasible_schedule_is_a_condition_failure() {
    let cfg = format!(
        r#"{{"sequence": {SEQ}, "schedule": {{"source": "explicit", "delta": "2/5", "x": "1/2"}}, "n_max": 8}}"#
    );
    unsafe {
        let mut cert = ptr::null_mut();
        assert_eq!(dyelim_construct(c(&cfg).as_ptr(), &mut cert), DyelimStatus::Condition);
        assert!(cert.is_null());
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/dyelim.h")).unwrap();
    for f in [
        "dyelim_version",
        "dyelim_last_error",
        "dyelim_string_free",
        "dyelim_sequence_from_json",
        "dyelim_sequence_len",
        "dyelim_sequence_dim",
        "dyelim_sequence_free",
        "dyelim_bound",
        "dyelim_measure_1d",
        "dyelim_construct",
        "dyelim_certificate_from_json",
        "dyelim_certificate_to_json",
        "dyelim_certificate_digest",
        "dyelim_verify",
        "dyelim_certificate_free",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing");
    }
    assert!(header.contains("typedef struct DyelimSequence DyelimSequence;"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let src = std::env::temp_dir().join(format!("dyelim_hdr_{}.c", std::process::id()));
    std::fs::write(
        &src,
        "#include \"dyelim.h\"\nint main(void){ DyelimSequence *s = 0; return (int)dyelim_sequence_len(s); }\n",
    )
    .unwrap();
    let st = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", dir])
        .arg(&src)
        .status()
        .unwrap();
    let _ = std::fs::remove_file(&src);
    assert!(st.success());
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if std::process::Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc);
        }
    }
    Err(())
}
