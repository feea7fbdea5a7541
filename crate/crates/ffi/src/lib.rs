//! C ABI over the title encoder, the vector index and cosine distance.
//!
//! Every fallible function returns a [`SkillsimStatus`]; on failure
//! `skillsim_last_error` returns a message for the calling thread. Handles
//! are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use skillsim::encoder::EncoderModel;
use skillsim::ranking::{build_index, rank, VectorIndex};
use skillsim::Error;

/// Result codes shared by all functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkillsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    InvalidArgument = 5,
    EmptyTitle = 6,
    DimensionMismatch = 7,
    BufferTooSmall = 8,
    Panic = 99,
}

/// Trained title encoder.
pub struct SkillsimEncoder(EncoderModel);

/// Exact nearest-neighbour index over unit vectors.
pub struct SkillsimIndex(VectorIndex);

/// Ranked `(id, score)` list returned by `skillsim_index_rank`.
pub struct SkillsimRanking(Vec<(CString, f64)>);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

struct Failure(SkillsimStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => SkillsimStatus::Io,
            Error::Format(_) | Error::Truncated { .. } | Error::Parse { .. } => SkillsimStatus::Format,
            Error::EmptyTitle => SkillsimStatus::EmptyTitle,
            Error::DimensionMismatch { .. } => SkillsimStatus::DimensionMismatch,
            _ => SkillsimStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: SkillsimStatus, message: impl Into<String>) -> Failure {
    Failure(status, message.into())
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SkillsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SkillsimStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SkillsimStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(SkillsimStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SkillsimStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(SkillsimStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(SkillsimStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(fail(SkillsimStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn skillsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads an encoder model file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn skillsim_encoder_load(path: *const c_char, out: *mut *mut SkillsimEncoder) -> SkillsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = PathBuf::from(str_arg(path, "path")?);
        let model = EncoderModel::load(&path)?;
        *out = Box::into_raw(Box::new(SkillsimEncoder(model)));
        Ok(())
    })
}

/// # Safety
/// `encoder` must come from `skillsim_encoder_load` or be null.
#[no_mangle]
pub unsafe extern "C" fn skillsim_encoder_free(encoder: *mut SkillsimEncoder) {
    if !encoder.is_null() {
        drop(Box::from_raw(encoder));
    }
}

/// Embedding dimension, or 0 for a null handle.
///
/// # Safety
/// `encoder` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn skillsim_encoder_dim(encoder: *const SkillsimEncoder) -> usize {
    encoder.as_ref().map_or(0, |e| e.0.dim())
}

/// Writes the unit-norm embedding of `title` to `out[0..dim]`.
///
/// # Safety
/// `title` must be NUL-terminated; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn skillsim_encoder_encode(
    encoder: *const SkillsimEncoder,
    title: *const c_char,
    out: *mut f64,
    out_len: usize,
) -> SkillsimStatus {
    guard(|| {
        let encoder = ref_arg(encoder, "encoder")?;
        let title = str_arg(title, "title")?;
        if out.is_null() {
            return Err(fail(SkillsimStatus::NullPointer, "out is null"));
        }
        let dim = encoder.0.dim();
        if out_len < dim {
            return Err(fail(
                SkillsimStatus::BufferTooSmall,
                format!("need {dim} doubles, got {out_len}"),
            ));
        }
        let v = encoder.0.encode(title)?;
        std::slice::from_raw_parts_mut(out, dim).copy_from_slice(&v);
        Ok(())
    })
}

/// Loads an index file into `*out`.
///
/// # Safety
/// `path` must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn skillsim_index_load(path: *const c_char, out: *mut *mut SkillsimIndex) -> SkillsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = PathBuf::from(str_arg(path, "path")?);
        *out = Box::into_raw(Box::new(SkillsimIndex(VectorIndex::load(&path)?)));
        Ok(())
    })
}

/// Encodes `n` titles with `encoder` and indexes them under `ids`. Titles
/// that normalize to nothing are skipped.
///
/// # Safety
/// `ids` and `titles` must each point to `n` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn skillsim_index_build(
    encoder: *const SkillsimEncoder,
    ids: *const *const c_char,
    titles: *const *const c_char,
    n: usize,
    out: *mut *mut SkillsimIndex,
) -> SkillsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let encoder = ref_arg(encoder, "encoder")?;
        if n > 0 && (ids.is_null() || titles.is_null()) {
            return Err(fail(SkillsimStatus::NullPointer, "ids or titles is null"));
        }
        let mut corpus = Vec::with_capacity(n);
        for i in 0..n {
            let id = str_arg(*ids.add(i), "id")?;
            let title = str_arg(*titles.add(i), "title")?;
            corpus.push((id.to_string(), title.to_string()));
        }
        let (index, _) = build_index(&corpus, &encoder.0, 1)?;
        *out = Box::into_raw(Box::new(SkillsimIndex(index)));
        Ok(())
    })
}

/// # Safety
/// `index` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn skillsim_index_save(index: *const SkillsimIndex, path: *const c_char) -> SkillsimStatus {
    guard(|| {
        let index = ref_arg(index, "index")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        index.0.save(&path)?;
        Ok(())
    })
}

/// Number of indexed entries, or 0 for a null handle.
///
/// # Safety
/// `index` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn skillsim_index_len(index: *const SkillsimIndex) -> usize {
    index.as_ref().map_or(0, |i| i.0.len())
}

/// # Safety
/// `index` must come from a `skillsim_index_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn skillsim_index_free(index: *mut SkillsimIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Ranks the index against a unit query vector. `k == 0` keeps every entry.
/// Scores descend; ties are broken by ascending id.
///
/// # Safety
/// `query` must hold `dim` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn skillsim_index_rank(
    index: *const SkillsimIndex,
    query: *const f64,
    dim: usize,
    k: usize,
    out: *mut *mut SkillsimRanking,
) -> SkillsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let index = ref_arg(index, "index")?;
        let query = slice_arg(query, dim, "query")?;
        let list = rank(&index.0, "", query, (k > 0).then_some(k))?;
        let items = list
            .items
            .into_iter()
            .map(|(id, s)| (CString::new(id).unwrap_or_default(), s))
            .collect();
        *out = Box::into_raw(Box::new(SkillsimRanking(items)));
        Ok(())
    })
}

/// # Safety
/// `ranking` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn skillsim_ranking_len(ranking: *const SkillsimRanking) -> usize {
    ranking.as_ref().map_or(0, |r| r.0.len())
}

/// Id at position `i`, or null when out of range. Owned by the ranking.
///
/// # Safety
/// `ranking` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn skillsim_ranking_id(ranking: *const SkillsimRanking, i: usize) -> *const c_char {
    ranking
        .as_ref()
        .and_then(|r| r.0.get(i))
        .map_or(ptr::null(), |(id, _)| id.as_ptr())
}

/// Score at position `i`, or NaN when out of range.
///
/// # Safety
/// `ranking` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn skillsim_ranking_score(ranking: *const SkillsimRanking, i: usize) -> f64 {
    ranking.as_ref().and_then(|r| r.0.get(i)).map_or(f64::NAN, |(_, s)| *s)
}

/// # Safety
/// `ranking` must come from `skillsim_index_rank` or be null.
#[no_mangle]
pub unsafe extern "C" fn skillsim_ranking_free(ranking: *mut SkillsimRanking) {
    if !ranking.is_null() {
        drop(Box::from_raw(ranking));
    }
}

/// `1 - cos(u, v)` for two vectors of length `n`.
///
/// # Safety
/// `u` and `v` must hold `n` doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn skillsim_cosine_distance(
    u: *const f64,
    v: *const f64,
    n: usize,
    out: *mut f64,
) -> SkillsimStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let u = slice_arg(u, n, "u")?;
        let v = slice_arg(v, n, "v")?;
        *out = skillsim::linalg::cosine_distance(u, v)?;
        Ok(())
    })
}
