//! C interface to anchorhull.
//!
//! Every fallible function returns an [`AhStatus`]. On failure the message is
//! kept per thread and can be read with [`ah_last_error`]. Handles are opaque
//! and must be released with their `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use anchorhull::anchors::{convex_hull, ConvexHull};
use anchorhull::pipeline::{run_pipeline, PipelineConfig, PipelineOutputs};
use anchorhull::toy::toy_curation;
use anchorhull::{AnchorMethod, Error};
use ndarray::ArrayView2;

pub const AH_METHOD_GREEDY: i32 = 0;
pub const AH_METHOD_HULL_PCA: i32 = 1;
pub const AH_METHOD_HULL_TSNE: i32 = 2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    KTooLarge = 4,
    DegenerateGeometry = 5,
    UnsupportedDim = 6,
    MixedArtifacts = 7,
    Io = 8,
    /// Numerical failure inside a stage (search, convergence, rank).
    Numerical = 9,
    /// Malformed input or artifact data.
    Format = 10,
    Panic = 99,
}

impl From<&Error> for AhStatus {
    fn from(e: &Error) -> Self {
        match e.root() {
            Error::InvalidArgument(_) | Error::EmptyVocabulary | Error::DegenerateDocument { .. } => {
                AhStatus::InvalidArgument
            }
            Error::KTooLarge { .. } => AhStatus::KTooLarge,
            Error::DegenerateGeometry { .. } | Error::Hull(_) => AhStatus::DegenerateGeometry,
            Error::UnsupportedDim { .. } => AhStatus::UnsupportedDim,
            Error::MixedArtifacts { .. } => AhStatus::MixedArtifacts,
            Error::Io(_) => AhStatus::Io,
            Error::Format { .. } | Error::Json(_) | Error::Csv(_) => AhStatus::Format,
            _ => AhStatus::Numerical,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

/// Runs `f`, recording errors and panics.
fn guard(f: impl FnOnce() -> Result<(), (AhStatus, String)>) -> AhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AhStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            AhStatus::Panic
        }
    }
}

fn fail(e: Error) -> (AhStatus, String) {
    ((&e).into(), e.to_string())
}

fn null(what: &str) -> (AhStatus, String) {
    (AhStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (AhStatus, String) {
    (AhStatus::InvalidArgument, msg.into())
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, (AhStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn copy_out<T: Copy>(src: &[T], out: *mut T, len: usize) -> Result<(), (AhStatus, String)> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < src.len() {
        return Err((
            AhStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Message of the last failure on this thread, empty after a success.
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ah_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ah_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Convex hull of a point set.
pub struct AhHull {
    hull: ConvexHull,
    dim: usize,
}

/// Hull of `n` points with `dim` (2 or 3) coordinates each, stored row-major.
///
/// # Safety
/// `points` must hold `n * dim` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ah_convex_hull(points: *const f64, n: usize, dim: usize, out: *mut *mut AhHull) -> AhStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        if points.is_null() {
            return Err(null("points"));
        }
        let len = n.checked_mul(dim).ok_or_else(|| invalid("n * dim overflows"))?;
        let data = std::slice::from_raw_parts(points, len);
        let view = ArrayView2::from_shape((n, dim), data).map_err(|e| invalid(e.to_string()))?;
        let hull = convex_hull(view).map_err(fail)?;
        *out = Box::into_raw(Box::new(AhHull { hull, dim }));
        Ok(())
    })
}

/// # Safety
/// `hull` must come from [`ah_convex_hull`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ah_hull_free(hull: *mut AhHull) {
    if !hull.is_null() {
        drop(Box::from_raw(hull));
    }
}

/// # Safety
/// `hull` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ah_hull_vertex_count(hull: *const AhHull) -> usize {
    hull.as_ref().map_or(0, |h| h.hull.vertices.len())
}

/// Ascending input indices of the hull vertices.
///
/// # Safety
/// `hull` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ah_hull_vertices(hull: *const AhHull, out: *mut usize, len: usize) -> AhStatus {
    guard(|| {
        let h = hull.as_ref().ok_or_else(|| null("hull"))?;
        copy_out(&h.hull.vertices, out, len)
    })
}

/// Number of facets: edges in 2-D, triangles in 3-D.
///
/// # Safety
/// `hull` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ah_hull_facet_count(hull: *const AhHull) -> usize {
    hull.as_ref().map_or(0, |h| h.hull.facets.len())
}

/// Facets as `dim` indices each, row-major. 2-D edges run counter-clockwise;
/// 3-D triangles are oriented outward.
///
/// # Safety
/// `hull` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ah_hull_facets(hull: *const AhHull, out: *mut usize, len: usize) -> AhStatus {
    guard(|| {
        let h = hull.as_ref().ok_or_else(|| null("hull"))?;
        let flat: Vec<usize> = h.hull.facets.iter().flatten().copied().collect();
        debug_assert_eq!(flat.len(), h.hull.facets.len() * h.dim);
        copy_out(&flat, out, len)
    })
}

/// Pipeline settings.
pub struct AhConfig {
    config: PipelineConfig,
}

/// Settings for a corpus file or directory, writing artifacts to `work_dir`.
/// Returns null on failure.
///
/// # Safety
/// Both arguments must be nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ah_config_new(corpus: *const c_char, work_dir: *const c_char) -> *mut AhConfig {
    let mut handle = std::ptr::null_mut();
    guard(|| {
        let config = PipelineConfig::new(path_arg(corpus, "corpus")?, path_arg(work_dir, "work_dir")?);
        handle = Box::into_raw(Box::new(AhConfig { config }));
        Ok(())
    });
    handle
}

/// # Safety
/// `config` must come from [`ah_config_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ah_config_free(config: *mut AhConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

unsafe fn with_config(
    config: *mut AhConfig,
    f: impl FnOnce(&mut PipelineConfig) -> Result<(), (AhStatus, String)>,
) -> AhStatus {
    guard(|| f(&mut config.as_mut().ok_or_else(|| null("config"))?.config))
}

/// One of the `AH_METHOD_*` constants.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ah_config_set_method(config: *mut AhConfig, method: i32) -> AhStatus {
    with_config(config, |c| {
        c.method = match method {
            AH_METHOD_GREEDY => AnchorMethod::Greedy,
            AH_METHOD_HULL_PCA => AnchorMethod::HullPca,
            AH_METHOD_HULL_TSNE => AnchorMethod::HullTsne,
            m => return Err(invalid(format!("unknown method {m}"))),
        };
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ah_config_set_topics(config: *mut AhConfig, k: usize) -> AhStatus {
    with_config(config, |c| {
        c.k = k;
        Ok(())
    })
}

/// Seed for the held-out split, the embedding and the held-out estimator.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ah_config_set_seed(config: *mut AhConfig, seed: u64) -> AhStatus {
    with_config(config, |c| {
        *c = c.clone().with_seed(seed);
        Ok(())
    })
}

/// Minimum corpus frequency for a word to stay in the vocabulary.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ah_config_set_min_freq(config: *mut AhConfig, min_freq: u64) -> AhStatus {
    with_config(config, |c| {
        c.curation.min_corpus_freq = min_freq;
        Ok(())
    })
}

/// Curation settings for the small bundled example corpus.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ah_config_use_toy_curation(config: *mut AhConfig) -> AhStatus {
    with_config(config, |c| {
        let seed = c.curation.seed;
        c.curation = toy_curation();
        c.curation.seed = seed;
        Ok(())
    })
}

/// A fitted model with its metrics.
pub struct AhModel {
    outputs: PipelineOutputs,
}

/// Runs every stage.
///
/// # Safety
/// `config` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ah_run_pipeline(config: *const AhConfig, out: *mut *mut AhModel) -> AhStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let outputs = run_pipeline(&c.config).map_err(fail)?;
        *out = Box::into_raw(Box::new(AhModel { outputs }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`ah_run_pipeline`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ah_model_free(model: *mut AhModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ah_model_topics(model: *const AhModel) -> usize {
    model.as_ref().map_or(0, |m| m.outputs.model.model.num_topics())
}

/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ah_model_vocab_size(model: *const AhModel) -> usize {
    model.as_ref().map_or(0, |m| m.outputs.corpus.vocabulary.len())
}

/// Word-given-topic probabilities, vocabulary-major (`vocab_size * topics` values).
///
/// # Safety
/// `model` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ah_model_topic_word(model: *const AhModel, out: *mut f64, len: usize) -> AhStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let a = m.outputs.model.model.a.as_standard_layout();
        copy_out(a.as_slice().expect("standard layout"), out, len)
    })
}

/// Anchor word ids of the topics, in topic order.
///
/// # Safety
/// `model` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn ah_model_anchors(model: *const AhModel, out: *mut usize, len: usize) -> AhStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        copy_out(&m.outputs.model.model.anchors.word_ids, out, len)
    })
}

/// Vocabulary entry `id`, or null when out of range. Release with [`ah_string_free`].
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ah_model_token(model: *const AhModel, id: usize) -> *mut c_char {
    let Some(m) = model.as_ref() else {
        return std::ptr::null_mut();
    };
    let vocab = &m.outputs.corpus.vocabulary;
    if id >= vocab.len() {
        return std::ptr::null_mut();
    }
    CString::new(vocab.token(id)).map_or(std::ptr::null_mut(), CString::into_raw)
}

/// Metrics report as JSON. Release with [`ah_string_free`].
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ah_model_metrics_json(model: *const AhModel) -> *mut c_char {
    let mut s = std::ptr::null_mut();
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let json = serde_json::to_string(&m.outputs.metrics.report).map_err(|e| fail(e.into()))?;
        s = CString::new(json).map_err(|e| invalid(e.to_string()))?.into_raw();
        Ok(())
    });
    s
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ah_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
