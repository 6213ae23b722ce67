//! C interface to hmil-explain.
//!
//! Every fallible function returns an [`HmilStatus`]; on failure a message is
//! available from [`hmil_last_error_message`] until the next call on the same
//! thread. Strings returned through out-parameters are owned by the caller
//! and must be released with [`hmil_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hmil_explain::explain::{explain, MethodSpec};
use hmil_explain::hmil::HmilModel;
use hmil_explain::sample::Sample;
use hmil_explain::schema::{infer_schema, read_jsonl};
use hmil_explain::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HmilStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    SchemaMismatch = 4,
    ModelFormat = 5,
    InvalidMethod = 6,
    InconsistentInput = 7,
    Io = 8,
    InvalidArgument = 9,
    Internal = 10,
}

/// Opaque trained model.
pub struct HmilModelHandle {
    model: HmilModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(HmilStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } | Error::Json(_) | Error::EmptyCorpus | Error::MixedType { .. } => {
                HmilStatus::Parse
            }
            Error::SchemaMismatch { .. } | Error::KindMismatch { .. } => HmilStatus::SchemaMismatch,
            Error::ModelFormat(_) => HmilStatus::ModelFormat,
            Error::InvalidMethod { .. } => HmilStatus::InvalidMethod,
            Error::InconsistentInput { .. } => HmilStatus::InconsistentInput,
            Error::Io(_) => HmilStatus::Io,
            Error::InvalidArgument(_) => HmilStatus::InvalidArgument,
            _ => HmilStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(HmilStatus::Parse, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HmilStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HmilStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            HmilStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(HmilStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            HmilStatus::InvalidUtf8,
            format!("{name} is not valid UTF-8"),
        )
    })
}

fn owned(s: String) -> *mut c_char {
    CString::new(s)
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(HmilStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// call into this library from the same thread.
#[no_mangle]
pub extern "C" fn hmil_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn hmil_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hmil_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Infers a schema from JSON-lines text and returns it as JSON.
///
/// # Safety
/// `jsonl` must be a NUL-terminated string; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hmil_infer_schema(
    jsonl: *const c_char,
    out_json: *mut *mut c_char,
) -> HmilStatus {
    guard(|| {
        non_null(out_json, "out_json")?;
        let docs = read_jsonl(text(jsonl, "jsonl")?)?;
        let schema = infer_schema(&docs)?;
        *out_json = owned(serde_json::to_string(&schema)?);
        Ok(())
    })
}

/// Loads a model from a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hmil_model_load(
    path: *const c_char,
    out: *mut *mut HmilModelHandle,
) -> HmilStatus {
    guard(|| {
        non_null(out, "out")?;
        let model = HmilModel::load(text(path, "path")?)?;
        *out = Box::into_raw(Box::new(HmilModelHandle { model }));
        Ok(())
    })
}

/// Loads a model from the JSON text of a model file.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hmil_model_from_json(
    json: *const c_char,
    out: *mut *mut HmilModelHandle,
) -> HmilStatus {
    guard(|| {
        non_null(out, "out")?;
        let model = HmilModel::from_json(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(HmilModelHandle { model }));
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hmil_model_free(model: *mut HmilModelHandle) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Confidence (positive minus negative class probability) of a JSON sample.
///
/// # Safety
/// `model` must be a live handle, `sample_json` a NUL-terminated string and
/// `out_confidence` writable.
#[no_mangle]
pub unsafe extern "C" fn hmil_model_classify(
    model: *const HmilModelHandle,
    sample_json: *const c_char,
    out_confidence: *mut f64,
) -> HmilStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out_confidence, "out_confidence")?;
        let value: serde_json::Value = serde_json::from_str(text(sample_json, "sample_json")?)?;
        let sample = Sample::from_json(&value)?;
        *out_confidence = (*model).model.classify_full(&sample)?.confidence;
        Ok(())
    })
}

/// Inference and gradient counts accumulated by `model`.
///
/// # Safety
/// `model` must be a live handle; the out-parameters must be writable.
#[no_mangle]
pub unsafe extern "C" fn hmil_model_counters(
    model: *const HmilModelHandle,
    out_inferences: *mut u64,
    out_gradients: *mut u64,
) -> HmilStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out_inferences, "out_inferences")?;
        non_null(out_gradients, "out_gradients")?;
        let c = (*model).model.counters();
        *out_inferences = c.inference_count;
        *out_gradients = c.gradient_count;
        Ok(())
    })
}

/// Explains a JSON sample with a method such as `"lbyl-banz-add+rr+ft"`.
/// Writes the pruned document and, if `out_metadata_json` is not NULL, a
/// metadata document with confidence, threshold, size and counts.
///
/// # Safety
/// `model` must be a live handle, the strings NUL-terminated, and
/// `out_pruned_json` writable.
#[no_mangle]
pub unsafe extern "C" fn hmil_explain(
    model: *const HmilModelHandle,
    sample_json: *const c_char,
    method: *const c_char,
    tau_factor: f64,
    seed: u64,
    out_pruned_json: *mut *mut c_char,
    out_metadata_json: *mut *mut c_char,
) -> HmilStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out_pruned_json, "out_pruned_json")?;
        if !(tau_factor > 0.0 && tau_factor <= 1.0) {
            return Err(Failure(
                HmilStatus::InvalidArgument,
                format!("tau_factor must lie in (0, 1], got {tau_factor}"),
            ));
        }
        let method: MethodSpec = text(method, "method")?.parse()?;
        let value: serde_json::Value = serde_json::from_str(text(sample_json, "sample_json")?)?;
        let sample = Sample::from_json(&value)?;
        let e = explain(&(*model).model, &sample, &method, tau_factor, seed)?;
        *out_pruned_json = owned(serde_json::to_string(&e.pruned)?);
        if !out_metadata_json.is_null() {
            *out_metadata_json = owned(serde_json::to_string(&e.metadata())?);
        }
        Ok(())
    })
}
