//! C ABI over the subpriv core: dataset loading and statistics behind an
//! opaque handle, plus the pure metric and comparison functions.
//!
//! Every fallible function returns a [`SubprivStatus`]; on failure the
//! message is available from [`subpriv_last_error`] on the same thread.
//! Strings returned through `out` pointers are owned by the caller and must
//! be released with [`subpriv_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use subpriv::corpus::{dataset_statistics, load_dataset, DatasetFormat, Document, PiiCategory, ValidationConfig};
use subpriv::metrics::{compute_cpr, compute_ipr, rouge_l, spearman_rho, SubjectExposure};
use subpriv::scoring::{compare_rule, jaro_winkler, ScoringConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubprivStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    /// The metric is undefined for this input (e.g. a constant series).
    Undefined = 5,
    Panic = 6,
}

/// A loaded dataset. Create with [`subpriv_dataset_load`], release with
/// [`subpriv_dataset_free`].
pub struct SubprivDataset {
    documents: Vec<Document>,
    rejected: usize,
    digest: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: SubprivStatus, msg: impl Into<String>) -> SubprivStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting a panic into [`SubprivStatus::Panic`].
fn guard(f: impl FnOnce() -> SubprivStatus) -> SubprivStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SubprivStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, SubprivStatus> {
    if p.is_null() {
        return Err(fail(SubprivStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SubprivStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], SubprivStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(SubprivStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn write<T>(out: *mut T, value: T) -> SubprivStatus {
    if out.is_null() {
        return fail(SubprivStatus::NullPointer, "output pointer is null");
    }
    *out = value;
    SubprivStatus::Ok
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn subpriv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn subpriv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn subpriv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a dataset file (JSONL, or a JSON array when the extension is
/// `.json`). Invalid records are skipped and counted.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subpriv_dataset_load(path: *const c_char, out: *mut *mut SubprivDataset) -> SubprivStatus {
    guard(|| {
        let path = Path::new(tri!(str_arg(path, "path")));
        if out.is_null() {
            return fail(SubprivStatus::NullPointer, "out is null");
        }
        match load_dataset(path, DatasetFormat::from_path(path), &ValidationConfig::default()) {
            Ok(l) => {
                let handle = SubprivDataset {
                    documents: l.documents,
                    rejected: l.rejected,
                    digest: CString::new(l.digest).expect("hex digest"),
                };
                write(out, Box::into_raw(Box::new(handle)))
            }
            Err(e) => fail(SubprivStatus::Io, e.to_string()),
        }
    })
}

/// # Safety
/// `ds` must be null or a handle from [`subpriv_dataset_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn subpriv_dataset_free(ds: *mut SubprivDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of valid documents; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subpriv_dataset_len(ds: *const SubprivDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.documents.len())
}

/// Number of rejected records; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subpriv_dataset_rejected(ds: *const SubprivDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.rejected)
}

/// SHA-256 of the file, hex. Borrowed from the handle; do not free.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subpriv_dataset_digest(ds: *const SubprivDataset) -> *const c_char {
    ds.as_ref().map_or(std::ptr::null(), |d| d.digest.as_ptr())
}

/// Corpus statistics as a JSON object, written to `*out`.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subpriv_dataset_stats_json(ds: *const SubprivDataset, out: *mut *mut c_char) -> SubprivStatus {
    guard(|| {
        let Some(ds) = ds.as_ref() else {
            return fail(SubprivStatus::NullPointer, "dataset is null");
        };
        let stats = match dataset_statistics(&ds.documents) {
            Ok(s) => s,
            Err(e) => return fail(SubprivStatus::InvalidArgument, e.to_string()),
        };
        let json = serde_json::to_string(&stats).expect("statistics serialize");
        write(out, CString::new(json).expect("json has no NUL").into_raw())
    })
}

unsafe fn exposure_args(o: *const usize, a: *const f64, n: usize) -> Result<Vec<SubjectExposure>, SubprivStatus> {
    let o = slice_arg(o, n, "o")?;
    let a = slice_arg(a, n, "a")?;
    Ok(o.iter()
        .zip(a)
        .enumerate()
        .map(|(i, (&o, &a))| SubjectExposure {
            doc_id: String::new(),
            subject_id: i as u32,
            o,
            a,
            target: false,
        })
        .collect())
}

/// Collective protection rate over `n` subjects with `o[i]` evaluable PIIs
/// and inferred mass `a[i]`.
///
/// # Safety
/// `o` and `a` must point to `n` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subpriv_cpr(o: *const usize, a: *const f64, n: usize, out: *mut f64) -> SubprivStatus {
    guard(|| {
        let ex = tri!(exposure_args(o, a, n));
        match compute_cpr(&ex) {
            Ok(v) => write(out, v),
            Err(e) => fail(SubprivStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Individual protection rate; every `o[i]` must be positive.
///
/// # Safety
/// As [`subpriv_cpr`].
#[no_mangle]
pub unsafe extern "C" fn subpriv_ipr(o: *const usize, a: *const f64, n: usize, out: *mut f64) -> SubprivStatus {
    guard(|| {
        let ex = tri!(exposure_args(o, a, n));
        match compute_ipr(&ex) {
            Ok(v) => write(out, v),
            Err(e) => fail(SubprivStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `a` and `b` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subpriv_jaro_winkler(a: *const c_char, b: *const c_char, out: *mut f64) -> SubprivStatus {
    guard(|| {
        let (a, b) = (tri!(str_arg(a, "a")), tri!(str_arg(b, "b")));
        write(out, jaro_winkler(a, b))
    })
}

/// ROUGE-L F1 on lowercased whitespace tokens.
///
/// # Safety
/// `reference` and `candidate` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subpriv_rouge_l(reference: *const c_char, candidate: *const c_char, out: *mut f64) -> SubprivStatus {
    guard(|| {
        let (r, c) = (tri!(str_arg(reference, "reference")), tri!(str_arg(candidate, "candidate")));
        write(out, rouge_l(r, c))
    })
}

/// Spearman rank correlation with average ranks for ties. A constant
/// series returns [`SubprivStatus::Undefined`].
///
/// # Safety
/// `a` and `b` must point to `n` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subpriv_spearman(a: *const f64, b: *const f64, n: usize, out: *mut f64) -> SubprivStatus {
    guard(|| {
        let (a, b) = (tri!(slice_arg(a, n, "a")), tri!(slice_arg(b, n, "b")));
        match spearman_rho(a, b) {
            Ok(Some(v)) => write(out, v),
            Ok(None) => fail(SubprivStatus::Undefined, "a series is constant"),
            Err(e) => fail(SubprivStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Rule-based comparison of two PII values. `*out_score` receives 0.0,
/// 0.5 or 1.0; `*out_decided` is false when the rules defer to a judge.
///
/// # Safety
/// String arguments must be NUL-terminated; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn subpriv_score_rule(
    category: *const c_char,
    gt: *const c_char,
    pred: *const c_char,
    out_score: *mut f64,
    out_decided: *mut bool,
) -> SubprivStatus {
    guard(|| {
        let category = tri!(str_arg(category, "category"));
        let (gt, pred) = (tri!(str_arg(gt, "gt")), tri!(str_arg(pred, "pred")));
        let category: PiiCategory = match category.parse() {
            Ok(c) => c,
            Err(e) => return fail(SubprivStatus::InvalidArgument, format!("{e}")),
        };
        if out_decided.is_null() {
            return fail(SubprivStatus::NullPointer, "out_decided is null");
        }
        let r = compare_rule(category, gt, pred, ScoringConfig::default().age_reference);
        *out_decided = r.decided;
        write(out_score, r.score.value())
    })
}
