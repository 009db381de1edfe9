//! C ABI for the `dyelim` engine.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Strings returned through `out`
//! parameters are NUL-terminated UTF-8 owned by the caller and released with
//! [`dyelim_string_free`]. Every fallible call returns a [`DyelimStatus`];
//! the message of the last failure on the calling thread is available from
//! [`dyelim_last_error`].
//!
//! Status values equal the exit codes of the `dyelim` command line, with a
//! few extra values for errors that only arise at the ABI.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use dyelim::cli::{self, RunConfig};
use dyelim::engine::{canonical_json, verify_certificate};
use dyelim::forms::{FormSequence, SequenceSpec};
use dyelim::measure::exact_bad_measure_1d;
use dyelim::numerics::{fmt_rational, parse_rational, to_f64};
use dyelim::theorems::{theorem1_schedule, theorem2_schedule};
use dyelim::Error;
use serde_json::Value;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DyelimStatus {
    Ok = 0,
    /// Precision exhausted; retry with more bits.
    Precision = 2,
    /// A condition of the construction failed.
    Condition = 3,
    /// The cube budget was exceeded.
    Budget = 4,
    /// Certificate verification failed.
    Verify = 5,
    /// Invalid argument or malformed input.
    Usage = 64,
    /// A required pointer was NULL.
    NullPointer = 65,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 66,
    /// The engine panicked; the handle arguments are left unchanged.
    Internal = 70,
}

/// A built sequence of linear forms together with its JSON spec.
pub struct DyelimSequence {
    spec: SequenceSpec,
    seq: FormSequence,
    precision_bits: u32,
}

/// A certificate document.
pub struct DyelimCertificate {
    value: Value,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Engine(Error),
    Status(DyelimStatus, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Engine(Error::Json(e))
    }
}

fn status_of(code: i32) -> DyelimStatus {
    match code {
        0 => DyelimStatus::Ok,
        2 => DyelimStatus::Precision,
        3 => DyelimStatus::Condition,
        4 => DyelimStatus::Budget,
        5 => DyelimStatus::Verify,
        _ => DyelimStatus::Usage,
    }
}

/// Runs `f`, records any failure and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DyelimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DyelimStatus::Ok
        }
        Ok(Err(Failure::Engine(e))) => {
            set_error(&e.to_string());
            status_of(cli::exit_code(&e))
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            DyelimStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(DyelimStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(DyelimStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(s).map_err(|_| Failure::Status(DyelimStatus::Internal, "NUL in output".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn precision(bits: u32) -> u32 {
    if bits == 0 {
        cli::DEFAULT_PRECISION
    } else {
        bits
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dyelim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dyelim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn dyelim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a sequence from its JSON spec. `precision_bits = 0` selects the
/// default precision.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dyelim_sequence_from_json(
    spec_json: *const c_char,
    precision_bits: u32,
    out: *mut *mut DyelimSequence,
) -> DyelimStatus {
    guard(|| {
        let text = read_str(spec_json, "spec_json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let spec: SequenceSpec = serde_json::from_str(text)?;
        let prec = precision(precision_bits);
        let (seq, _) = spec.build(prec)?;
        *out = Box::into_raw(Box::new(DyelimSequence {
            spec,
            seq,
            precision_bits: prec,
        }));
        Ok(())
    })
}

/// Number of forms, or 0 for NULL.
///
/// # Safety
/// `seq` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dyelim_sequence_len(seq: *const DyelimSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.seq.len())
}

/// Dimension `d`, or 0 for NULL.
///
/// # Safety
/// `seq` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dyelim_sequence_dim(seq: *const DyelimSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.seq.dim())
}

/// # Safety
/// `seq` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dyelim_sequence_free(seq: *mut DyelimSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// δ of Theorem 1 or 2 as `[lo, hi]`, plus the full calculator output as
/// JSON when `out_json` is not NULL.
///
/// # Safety
/// `lo` and `hi` must be valid; `out_json` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn dyelim_bound(
    theorem: u32,
    n: u64,
    d: u64,
    precision_bits: u32,
    lo: *mut f64,
    hi: *mut f64,
    out_json: *mut *mut c_char,
) -> DyelimStatus {
    guard(|| {
        if lo.is_null() || hi.is_null() {
            return Err(null("lo/hi"));
        }
        let prec = precision(precision_bits);
        let (delta, doc) = match theorem {
            1 => {
                let (delta, p, _) = theorem1_schedule(n, d, prec)?;
                (delta, p.to_json())
            }
            2 => {
                let (delta, p, _, _) = theorem2_schedule(n, d, prec)?;
                (delta, p.to_json())
            }
            t => {
                return Err(Failure::Status(
                    DyelimStatus::Usage,
                    format!("theorem {t} has no constant bound; use 1 or 2"),
                ))
            }
        };
        *lo = to_f64(delta.lo());
        *hi = to_f64(delta.hi());
        if !out_json.is_null() {
            write_string(out_json, canonical_json(&doc))?;
        }
        Ok(())
    })
}

/// Exact measure of `{θ ∈ [u, v] : ‖aθ + b‖ <= ε}` with rationals given as
/// strings such as `"3/8"`; the result is written as a rational string.
///
/// # Safety
/// All string arguments must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dyelim_measure_1d(
    a: *const c_char,
    b: *const c_char,
    eps: *const c_char,
    u: *const c_char,
    v: *const c_char,
    out: *mut *mut c_char,
) -> DyelimStatus {
    guard(|| {
        let q = |p, w| -> Result<_, Failure> { Ok(parse_rational(read_str(p, w)?)?) };
        let m = exact_bad_measure_1d(&q(a, "a")?, &q(b, "b")?, &q(eps, "eps")?, &q(u, "u")?, &q(v, "v")?)?;
        write_string(out, fmt_rational(&m))
    })
}

/// Runs the construction described by a run config (the JSON accepted by
/// `dyelim construct --config`). Relative sequence paths resolve against the
/// working directory. On a failed condition the violation is in
/// [`dyelim_last_error`].
///
/// # Safety
/// `config_json` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dyelim_construct(
    config_json: *const c_char,
    out: *mut *mut DyelimCertificate,
) -> DyelimStatus {
    guard(|| {
        let text = read_str(config_json, "config_json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg: RunConfig = serde_json::from_str(text)?;
        let prep = cfg.prepare(None, cli::DEFAULT_PRECISION)?;
        let (cert, _) = cli::construct(&prep)?;
        *out = Box::into_raw(Box::new(DyelimCertificate {
            value: cert.into_value(),
        }));
        Ok(())
    })
}

/// Parses a certificate without checking it.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dyelim_certificate_from_json(
    json: *const c_char,
    out: *mut *mut DyelimCertificate,
) -> DyelimStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let value: Value = serde_json::from_str(text)?;
        if !value.is_object() {
            return Err(Failure::Status(DyelimStatus::Usage, "a certificate is a JSON object".into()));
        }
        *out = Box::into_raw(Box::new(DyelimCertificate { value }));
        Ok(())
    })
}

/// Canonical JSON of a certificate.
///
/// # Safety
/// `cert` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dyelim_certificate_to_json(
    cert: *const DyelimCertificate,
    out: *mut *mut c_char,
) -> DyelimStatus {
    guard(|| {
        let c = cert.as_ref().ok_or_else(|| null("cert"))?;
        write_string(out, canonical_json(&c.value))
    })
}

/// The recorded `certificate_digest`.
///
/// # Safety
/// `cert` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dyelim_certificate_digest(
    cert: *const DyelimCertificate,
    out: *mut *mut c_char,
) -> DyelimStatus {
    guard(|| {
        let c = cert.as_ref().ok_or_else(|| null("cert"))?;
        let d = c
            .value
            .get("certificate_digest")
            .and_then(Value::as_str)
            .ok_or_else(|| Failure::Status(DyelimStatus::Usage, "certificate has no digest".into()))?;
        write_string(out, d.to_string())
    })
}

/// Re-checks a certificate against a sequence. Returns `Ok` when every check
/// passes and `Verify` otherwise; the report is written to `out_report` when
/// it is not NULL.
///
/// # Safety
/// `cert` and `seq` must be live handles; `out_report` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn dyelim_verify(
    cert: *const DyelimCertificate,
    seq: *const DyelimSequence,
    out_report: *mut *mut c_char,
) -> DyelimStatus {
    guard(|| {
        let c = cert.as_ref().ok_or_else(|| null("cert"))?;
        let s = seq.as_ref().ok_or_else(|| null("seq"))?;
        let report = verify_certificate(&c.value, &s.spec, s.precision_bits);
        if !out_report.is_null() {
            write_string(out_report, canonical_json(&report.to_json()))?;
        }
        if report.pass() {
            Ok(())
        } else {
            let first = report.failures().next().map(|f| format!("{}: {}", f.name, f.detail));
            Err(Failure::Status(
                DyelimStatus::Verify,
                first.unwrap_or_else(|| "verification failed".into()),
            ))
        }
    })
}

/// # Safety
/// `cert` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dyelim_certificate_free(cert: *mut DyelimCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}
