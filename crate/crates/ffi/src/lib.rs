//! C ABI over `densify`.
//!
//! Artifacts are opaque handles created by [`densify_artifact_load`] and
//! released by [`densify_artifact_free`]. Every fallible call returns a
//! [`DensifyStatus`]; on failure [`densify_last_error`] describes the cause
//! for the calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use densify::artifact::{load_artifact, ArtifactError, PipelineArtifact};
use densify::eval::{roc_auc, EvalError, Scenario};
use densify::matrix::FeatureMatrix;
use densify::models::ModelKind;

pub const DENSIFY_SCENARIO_RAW: u32 = 0;
pub const DENSIFY_SCENARIO_ENHANCED: u32 = 1;

pub const DENSIFY_MODEL_NAIVE_BAYES: u32 = 0;
pub const DENSIFY_MODEL_RANDOM_FOREST: u32 = 1;
pub const DENSIFY_MODEL_MLP2: u32 = 2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensifyStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    VersionMismatch = 4,
    CorruptArtifact = 5,
    InvalidArgument = 6,
    BufferTooSmall = 7,
    NotFound = 8,
    Internal = 9,
}

/// Opaque loaded artifact.
pub struct DensifyArtifact {
    inner: PipelineArtifact,
    class_names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: DensifyStatus, msg: impl Into<String>) -> DensifyStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> DensifyStatus) -> DensifyStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(DensifyStatus::Internal, "internal panic"))
}

fn scenario(code: u32) -> Option<Scenario> {
    match code {
        DENSIFY_SCENARIO_RAW => Some(Scenario::Raw),
        DENSIFY_SCENARIO_ENHANCED => Some(Scenario::Enhanced),
        _ => None,
    }
}

fn model(code: u32) -> Option<ModelKind> {
    match code {
        DENSIFY_MODEL_NAIVE_BAYES => Some(ModelKind::NaiveBayes),
        DENSIFY_MODEL_RANDOM_FOREST => Some(ModelKind::RandomForest),
        DENSIFY_MODEL_MLP2 => Some(ModelKind::Mlp2),
        _ => None,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn densify_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn densify_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads an artifact file. On success `*out` owns a handle.
#[no_mangle]
pub unsafe extern "C" fn densify_artifact_load(path: *const c_char, out: *mut *mut DensifyArtifact) -> DensifyStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(DensifyStatus::NullPointer, "path and out must be non-null");
        }
        *out = ptr::null_mut();
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(DensifyStatus::InvalidUtf8, "path is not UTF-8");
        };
        match load_artifact(Path::new(path)) {
            Ok(inner) => {
                let class_names = inner
                    .taxonomy
                    .names()
                    .iter()
                    .map(|n| CString::new(n.as_str()).unwrap_or_default())
                    .collect();
                *out = Box::into_raw(Box::new(DensifyArtifact { inner, class_names }));
                DensifyStatus::Ok
            }
            Err(e) => {
                let status = match e {
                    ArtifactError::Io(_) => DensifyStatus::Io,
                    ArtifactError::VersionMismatch { .. } => DensifyStatus::VersionMismatch,
                    ArtifactError::CorruptArtifact(_) => DensifyStatus::CorruptArtifact,
                    _ => DensifyStatus::Internal,
                };
                fail(status, e.to_string())
            }
        }
    })
}

/// Releases a handle. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn densify_artifact_free(artifact: *mut DensifyArtifact) {
    if !artifact.is_null() {
        drop(Box::from_raw(artifact));
    }
}

/// Number of classes, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn densify_artifact_n_classes(artifact: *const DensifyArtifact) -> usize {
    artifact.as_ref().map_or(0, |a| a.class_names.len())
}

/// Class name at `index`, owned by the handle; NULL when out of range.
#[no_mangle]
pub unsafe extern "C" fn densify_artifact_class_name(artifact: *const DensifyArtifact, index: usize) -> *const c_char {
    artifact
        .as_ref()
        .and_then(|a| a.class_names.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Scores `n_texts` UTF-8 strings. Writes `n_texts * n_classes` probabilities
/// row-major into `out`, which must hold at least that many values.
#[no_mangle]
pub unsafe extern "C" fn densify_artifact_predict_proba(
    artifact: *const DensifyArtifact,
    texts: *const *const c_char,
    n_texts: usize,
    scenario_code: u32,
    model_code: u32,
    out: *mut f64,
    out_len: usize,
) -> DensifyStatus {
    guard(|| {
        let Some(a) = artifact.as_ref() else {
            return fail(DensifyStatus::NullPointer, "artifact is null");
        };
        if n_texts > 0 && (texts.is_null() || out.is_null()) {
            return fail(DensifyStatus::NullPointer, "texts and out must be non-null");
        }
        let (Some(sc), Some(kind)) = (scenario(scenario_code), model(model_code)) else {
            return fail(DensifyStatus::InvalidArgument, "unknown scenario or model code");
        };
        let k = a.class_names.len();
        let Some(needed) = n_texts.checked_mul(k) else {
            return fail(DensifyStatus::InvalidArgument, "n_texts too large");
        };
        if out_len < needed {
            return fail(DensifyStatus::BufferTooSmall, format!("need {needed} values, got {out_len}"));
        }
        let mut owned = Vec::with_capacity(n_texts);
        for i in 0..n_texts {
            let p = *texts.add(i);
            if p.is_null() {
                return fail(DensifyStatus::NullPointer, format!("text {i} is null"));
            }
            match CStr::from_ptr(p).to_str() {
                Ok(s) => owned.push(s),
                Err(_) => return fail(DensifyStatus::InvalidUtf8, format!("text {i} is not UTF-8")),
            }
        }
        match a.inner.predict_texts(&owned, sc, kind) {
            Ok(p) => {
                std::slice::from_raw_parts_mut(out, needed).copy_from_slice(p.values());
                DensifyStatus::Ok
            }
            Err(e @ ArtifactError::MissingClassifier { .. }) => fail(DensifyStatus::NotFound, e.to_string()),
            Err(e) => fail(DensifyStatus::Internal, e.to_string()),
        }
    })
}

/// Fraction of exact zeros among `len` values.
#[no_mangle]
pub unsafe extern "C" fn densify_sparsity(values: *const f64, len: usize, out: *mut f64) -> DensifyStatus {
    guard(|| {
        if values.is_null() || out.is_null() {
            return fail(DensifyStatus::NullPointer, "values and out must be non-null");
        }
        let data = std::slice::from_raw_parts(values, len).to_vec();
        match FeatureMatrix::from_vec(1, len, data).and_then(|m| m.sparsity()) {
            Ok(s) => {
                *out = s;
                DensifyStatus::Ok
            }
            Err(e) => fail(DensifyStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// `(i + offset) mod modulus`.
#[no_mangle]
pub unsafe extern "C" fn densify_loop_modulus_index(i: usize, offset: usize, modulus: usize, out: *mut usize) -> DensifyStatus {
    guard(|| {
        if out.is_null() {
            return fail(DensifyStatus::NullPointer, "out is null");
        }
        match densify::enhance::loop_modulus_index(i, offset, modulus) {
            Ok(j) => {
                *out = j;
                DensifyStatus::Ok
            }
            Err(e) => fail(DensifyStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Area under the ROC curve for binary `labels` (non-zero = positive).
#[no_mangle]
pub unsafe extern "C" fn densify_roc_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> DensifyStatus {
    guard(|| {
        if scores.is_null() || labels.is_null() || out.is_null() {
            return fail(DensifyStatus::NullPointer, "scores, labels and out must be non-null");
        }
        let s = std::slice::from_raw_parts(scores, n);
        let l: Vec<bool> = std::slice::from_raw_parts(labels, n).iter().map(|&b| b != 0).collect();
        match roc_auc(s, &l) {
            Ok(r) => {
                *out = r.auc;
                DensifyStatus::Ok
            }
            Err(e @ (EvalError::SingleClass | EvalError::NonFiniteScore(_))) => {
                fail(DensifyStatus::InvalidArgument, e.to_string())
            }
            Err(e) => fail(DensifyStatus::Internal, e.to_string()),
        }
    })
}
