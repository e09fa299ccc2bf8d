//! C ABI over `riq-core`: load a classifier and a keyword index, classify
//! feature vectors or images, and query the index.
//!
//! Every fallible function returns a [`RiqStatus`]. On failure the message is
//! available from [`riq_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use riq_core::features::FeatureVector;
use riq_core::mlnn::{self, MlafParams, MlnnModel};
use riq_core::pipeline::{analyze_image, PipelineParams};
use riq_core::retrieval::{self, ImageIndex, QueryMode};
use riq_core::Error;

/// Result codes. `RIQ_STATUS_OK` is zero; everything else is a failure.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiqStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    FileNotFound = 3,
    Io = 4,
    Image = 5,
    Format = 6,
    InvalidParameter = 7,
    DimensionMismatch = 8,
    UnknownKeyword = 9,
    Internal = 10,
    Panic = 11,
}

/// A loaded classifier.
pub struct RiqModel {
    model: MlnnModel,
    names: Vec<CString>,
}

/// A loaded keyword index.
pub struct RiqIndex {
    index: ImageIndex,
}

/// An owned list of strings returned by classification and queries.
pub struct RiqStringList {
    items: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> RiqStatus {
    match e {
        Error::FileNotFound(_) => RiqStatus::FileNotFound,
        Error::Io(_) => RiqStatus::Io,
        Error::UnsupportedFormat(_) | Error::CorruptImage { .. } => RiqStatus::Image,
        Error::Format(_) | Error::FingerprintMismatch { .. } | Error::BadManifest { .. } => RiqStatus::Format,
        Error::InvalidParameter { .. } => RiqStatus::InvalidParameter,
        Error::DimensionMismatch { .. } => RiqStatus::DimensionMismatch,
        Error::UnknownKeyword(_) => RiqStatus::UnknownKeyword,
        _ => RiqStatus::Internal,
    }
}

struct Failure(RiqStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `f`, recording any failure or panic for `riq_last_error_message`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RiqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RiqStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RiqStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(RiqStatus::NullArgument, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(RiqStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn c_strings<I: IntoIterator<Item = String>>(items: I) -> Vec<CString> {
    items
        .into_iter()
        .map(|s| CString::new(s.replace('\0', " ")).unwrap_or_default())
        .collect()
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn riq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn riq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Multi-level activation at `x` for steepness `beta`, window width `c` and
/// `n` levels. Returns NaN for invalid parameters.
#[no_mangle]
pub extern "C" fn riq_mlaf(x: f64, beta: f64, c: f64, n: usize) -> f64 {
    let p = MlafParams { beta, c, n };
    match p.validate() {
        Ok(()) => mlnn::mlaf(x, &p),
        Err(e) => {
            set_error(e.to_string());
            f64::NAN
        }
    }
}

/// Loads a model file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn riq_model_load(path: *const c_char, out: *mut *mut RiqModel) -> RiqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let model = mlnn::read_model(Path::new(path))?;
        let names = c_strings(model.categories.iter().cloned());
        *out = Box::into_raw(Box::new(RiqModel { model, names }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from `riq_model_load` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn riq_model_free(model: *mut RiqModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Expected raw feature length, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn riq_model_input_dim(model: *const RiqModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.input_dim)
}

/// Number of categories, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn riq_model_category_count(model: *const RiqModel) -> usize {
    model.as_ref().map_or(0, |m| m.names.len())
}

/// Name of category `level` (1-based), owned by the model, or null when out
/// of range.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn riq_model_category_name(model: *const RiqModel, level: usize) -> *const c_char {
    match model.as_ref() {
        Some(m) if (1..=m.names.len()).contains(&level) => m.names[level - 1].as_ptr(),
        _ => ptr::null(),
    }
}

/// Classifies one raw (unnormalized) feature vector. Writes the 1-based
/// category to `*level` and the network output to `*output`; either may be null.
///
/// # Safety
/// `features` must point to `len` doubles; `level` and `output` must be null
/// or writable.
#[no_mangle]
pub unsafe extern "C" fn riq_model_predict(
    model: *const RiqModel,
    features: *const f64,
    len: usize,
    level: *mut usize,
    output: *mut f64,
) -> RiqStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if features.is_null() {
            return Err(null("features"));
        }
        let v = FeatureVector::new(std::slice::from_raw_parts(features, len).to_vec());
        let (l, y) = m.model.classify(&v)?;
        if !level.is_null() {
            *level = l;
        }
        if !output.is_null() {
            *output = y;
        }
        Ok(())
    })
}

/// Segments an image with default parameters and returns one category name
/// per significant region, in region order.
///
/// # Safety
/// `model` must be a live handle, `path` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn riq_model_classify_image(
    model: *const RiqModel,
    path: *const c_char,
    out: *mut *mut RiqStringList,
) -> RiqStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let analysis = analyze_image(Path::new(path), &PipelineParams::default())?;
        let mut names = Vec::with_capacity(analysis.features.len());
        for f in &analysis.features {
            let (level, _) = m.model.classify(f)?;
            names.push(m.model.category_name(level).to_string());
        }
        *out = Box::into_raw(Box::new(RiqStringList {
            items: c_strings(names),
        }));
        Ok(())
    })
}

/// Loads an index file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn riq_index_load(path: *const c_char, out: *mut *mut RiqIndex) -> RiqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let index = retrieval::load_index(Path::new(path))?;
        *out = Box::into_raw(Box::new(RiqIndex { index }));
        Ok(())
    })
}

/// # Safety
/// `index` must come from `riq_index_load` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn riq_index_free(index: *mut RiqIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Number of indexed images, or 0 for a null handle.
///
/// # Safety
/// `index` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn riq_index_len(index: *const RiqIndex) -> usize {
    index.as_ref().map_or(0, |i| i.index.records.len())
}

/// Ids of images containing all `keywords` (or any of them when
/// `match_any` is true), sorted. Keywords are category names, any case.
///
/// # Safety
/// `keywords` must point to `count` NUL-terminated strings; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn riq_index_query(
    index: *const RiqIndex,
    keywords: *const *const c_char,
    count: usize,
    match_any: bool,
    out: *mut *mut RiqStringList,
) -> RiqStatus {
    guard(|| {
        let idx = index.as_ref().ok_or_else(|| null("index"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if keywords.is_null() && count > 0 {
            return Err(null("keywords"));
        }
        let mut terms = Vec::with_capacity(count);
        for i in 0..count {
            terms.push(str_arg(*keywords.add(i), "keyword")?);
        }
        let vocabulary: BTreeSet<&str> = idx
            .index
            .records
            .iter()
            .flat_map(|r| r.keywords.iter().map(String::as_str))
            .chain(mlnn::DEFAULT_CATEGORIES)
            .collect();
        let vocabulary: Vec<&str> = vocabulary.into_iter().collect();
        let set = retrieval::resolve_keywords(&terms, &vocabulary)?;
        let mode = if match_any { QueryMode::Any } else { QueryMode::All };
        let ids = retrieval::query(&idx.index, &set, mode);
        *out = Box::into_raw(Box::new(RiqStringList { items: c_strings(ids) }));
        Ok(())
    })
}

/// # Safety
/// `list` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn riq_string_list_len(list: *const RiqStringList) -> usize {
    list.as_ref().map_or(0, |l| l.items.len())
}

/// Item `i`, owned by the list, or null when out of range.
///
/// # Safety
/// `list` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn riq_string_list_get(list: *const RiqStringList, i: usize) -> *const c_char {
    list.as_ref()
        .and_then(|l| l.items.get(i))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// # Safety
/// `list` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn riq_string_list_free(list: *mut RiqStringList) {
    if !list.is_null() {
        drop(Box::from_raw(list));
    }
}
