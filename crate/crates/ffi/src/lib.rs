//! C ABI for `narrative-eval`.
//!
//! Conventions:
//!
//! * Every fallible function returns an [`NeStatus`]; results go through out
//!   pointers, which are written only on success.
//! * Masks, embedding sets and reports are opaque handles created by a
//!   `*_new`/`*_load` function and released with the matching `*_free`.
//!   Passing a null handle to a `*_free` function is a no-op.
//! * On failure, [`ne_last_error_message`] returns a description of the most
//!   recent error on the calling thread.
//! * Panics never cross the boundary; they surface as
//!   [`NeStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use narrative_eval::attention::{
    mask_attention_loss, AttentionError, AttentionMap, CharacterRegion, RegionSpec,
};
use narrative_eval::distribution::{cvc_evaluate, DistributionError, EmbeddingSet};
use narrative_eval::embedding::{read_embeddings, EmbeddingError};
use narrative_eval::harness::{report_from_raw, run_evaluation, EvalError};
use narrative_eval::mask::{extract_contour, load_mask, overlap, BinaryMask, MaskError};
use narrative_eval::scoring::{aggregate_overall, f1, RawMetricVector, ScoringError};
use narrative_eval::surface::{surface_distances, SurfaceError};
use narrative_eval::{EvalOptions, EvaluationManifest, MetricReport};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument is outside its domain (negative distance, bad index, ...).
    InvalidArgument = 2,
    /// Shapes or dimensions of two inputs disagree.
    DimensionMismatch = 3,
    /// A required input is empty (no samples, empty contour, ...).
    EmptyInput = 4,
    /// Image or file contents could not be decoded.
    Decode = 5,
    /// A file could not be read or written.
    Io = 6,
    /// A numerical precondition failed (indefinite or asymmetric matrix).
    Numerical = 7,
    /// The requested value is not present (e.g. no overall score).
    NotAvailable = 8,
    /// A panic was caught; this indicates a bug.
    Internal = 9,
}

/// Binary mask handle.
pub struct NeMask(BinaryMask);

/// Embedding set handle (`n` samples of dimension `d`).
pub struct NeEmbeddings(EmbeddingSet);

/// Evaluation report handle; owns its JSON rendering.
pub struct NeReport {
    report: MetricReport,
    json: CString,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NeOverlap {
    pub intersection: usize,
    pub union_count: usize,
    pub size_a: usize,
    pub size_b: usize,
    pub dice: f64,
    pub iou: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NeSurfaceDistances {
    pub hausdorff: f64,
    pub modified_hausdorff: f64,
    pub average_surface_distance: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NeFrechet {
    pub fid: f64,
    pub mean_term: f64,
    pub trace_term: f64,
    /// Non-zero when `epsilon * I` was added to both covariances.
    pub regularization_applied: u8,
}

/// Dataset-level raw metrics, in the order CN, SR, LA, BDP, MC, ADS.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NeRawMetrics {
    pub cn: f64,
    pub sr: f64,
    pub la: f64,
    pub bdp: f64,
    pub mc: f64,
    pub ads: f64,
}

/// One character for the attention loss: its word indices and a target
/// region of `pixels` bytes (non-zero = inside).
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NeCharacter {
    pub words: *const usize,
    pub word_count: usize,
    pub target: *const u8,
}

/// Options for [`ne_evaluate_manifest`]. Start from
/// [`ne_options_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeOptions {
    pub skip_empty: u8,
    pub normalize_distances: u8,
    pub epsilon: f64,
    /// Worker threads for per-pair metrics; 0 uses the global pool.
    pub threads: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    let c = CString::new(text).expect("interior NULs replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Failure(NeStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(NeStatus::NullPointer, format!("{what} is null"))
    }
}

impl From<MaskError> for Failure {
    fn from(e: MaskError) -> Self {
        let status = match &e {
            MaskError::Decode(_) | MaskError::UnsupportedFormat(_) => NeStatus::Decode,
            MaskError::DimensionMismatch { .. } | MaskError::Pair { .. } => {
                NeStatus::DimensionMismatch
            }
            MaskError::EmptyInput => NeStatus::EmptyInput,
            _ => NeStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<SurfaceError> for Failure {
    fn from(e: SurfaceError) -> Self {
        Failure(NeStatus::EmptyInput, e.to_string())
    }
}

impl From<DistributionError> for Failure {
    fn from(e: DistributionError) -> Self {
        let status = match &e {
            DistributionError::EmptyEmbeddings | DistributionError::EmptyInput => {
                NeStatus::EmptyInput
            }
            DistributionError::DimensionMismatch { .. } | DistributionError::NotSquare { .. } => {
                NeStatus::DimensionMismatch
            }
            DistributionError::NotSymmetric(_)
            | DistributionError::IndefiniteMatrix(_)
            | DistributionError::NegativeDistance(_) => NeStatus::Numerical,
            _ => NeStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<EmbeddingError> for Failure {
    fn from(e: EmbeddingError) -> Self {
        match e {
            EmbeddingError::Io { .. } => Failure(NeStatus::Io, e.to_string()),
            EmbeddingError::Format(_) => Failure(NeStatus::Decode, e.to_string()),
            EmbeddingError::Invalid(inner) => inner.into(),
        }
    }
}

impl From<ScoringError> for Failure {
    fn from(e: ScoringError) -> Self {
        Failure(NeStatus::InvalidArgument, e.to_string())
    }
}

impl From<AttentionError> for Failure {
    fn from(e: AttentionError) -> Self {
        let status = match &e {
            AttentionError::ShapeMismatch(_) => NeStatus::DimensionMismatch,
            _ => NeStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let status = if e.is_io() {
            NeStatus::Io
        } else {
            NeStatus::InvalidArgument
        };
        Failure(status, e.to_string())
    }
}

/// Runs `body`, records any failure for [`ne_last_error_message`], and
/// converts panics into [`NeStatus::Internal`].
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> NeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => NeStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {message}"));
            NeStatus::Internal
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

/// A slice from a pointer and length; a null pointer is accepted only for an
/// empty slice.
unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, Failure> {
    let text = borrow(p, what).map(|c| CStr::from_ptr(c))?;
    let text = text
        .to_str()
        .map_err(|_| Failure(NeStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(Path::new(text))
}

fn checked_len(a: usize, b: usize) -> Result<usize, Failure> {
    a.checked_mul(b)
        .ok_or_else(|| Failure(NeStatus::InvalidArgument, "size overflows".into()))
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ne_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ne_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a mask from `width * height` bytes in row-major order; non-zero
/// bytes are foreground.
///
/// # Safety
/// `data` must point to `width * height` readable bytes; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ne_mask_new(
    width: usize,
    height: usize,
    data: *const u8,
    out: *mut *mut NeMask,
) -> NeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let bytes = slice_arg(data, checked_len(width, height)?, "data")?;
        let mask = BinaryMask::new(width, height, bytes.iter().map(|&b| b != 0).collect())?;
        *out = Box::into_raw(Box::new(NeMask(mask)));
        Ok(())
    })
}

/// Decodes a PNG; pixels with luminance above 127 are foreground.
///
/// # Safety
/// `bytes` must point to `len` readable bytes; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ne_mask_from_png(
    bytes: *const u8,
    len: usize,
    out: *mut *mut NeMask,
) -> NeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let mask = load_mask(slice_arg(bytes, len, "bytes")?)?;
        *out = Box::into_raw(Box::new(NeMask(mask)));
        Ok(())
    })
}

/// # Safety
/// `mask` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ne_mask_free(mask: *mut NeMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// Width, height and foreground pixel count of a mask.
///
/// # Safety
/// `mask` must be a live handle; out pointers may be null to skip a value.
#[no_mangle]
pub unsafe extern "C" fn ne_mask_info(
    mask: *const NeMask,
    width: *mut usize,
    height: *mut usize,
    foreground: *mut usize,
) -> NeStatus {
    guard(|| {
        let m = &borrow(mask, "mask")?.0;
        if let Some(w) = width.as_mut() {
            *w = m.width();
        }
        if let Some(h) = height.as_mut() {
            *h = m.height();
        }
        if let Some(f) = foreground.as_mut() {
            *f = m.foreground_count();
        }
        Ok(())
    })
}

/// Dice and IoU of two masks of the same shape. Two empty masks score 1.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ne_overlap(
    a: *const NeMask,
    b: *const NeMask,
    out: *mut NeOverlap,
) -> NeStatus {
    guard(|| {
        let (a, b) = (&borrow(a, "a")?.0, &borrow(b, "b")?.0);
        let out = out_ref(out, "out")?;
        let r = overlap(a, b)?;
        *out = NeOverlap {
            intersection: r.intersection,
            union_count: r.union,
            size_a: r.size_a,
            size_b: r.size_b,
            dice: r.dice,
            iou: r.iou,
        };
        Ok(())
    })
}

/// Hausdorff, Modified Hausdorff and Average Surface Distance between the
/// contours of two masks. Fails with `EmptyInput` if either contour is empty.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ne_surface_distances(
    a: *const NeMask,
    b: *const NeMask,
    out: *mut NeSurfaceDistances,
) -> NeStatus {
    guard(|| {
        let (a, b) = (&borrow(a, "a")?.0, &borrow(b, "b")?.0);
        let out = out_ref(out, "out")?;
        let d = surface_distances(&extract_contour(a), &extract_contour(b))?;
        *out = NeSurfaceDistances {
            hausdorff: d.hausdorff,
            modified_hausdorff: d.modified_hausdorff,
            average_surface_distance: d.average_surface_distance,
        };
        Ok(())
    })
}

/// Creates an embedding set from `n * d` doubles in row-major order.
///
/// # Safety
/// `data` must point to `n * d` readable doubles; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn ne_embeddings_new(
    n: usize,
    d: usize,
    data: *const f64,
    out: *mut *mut NeEmbeddings,
) -> NeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let values = slice_arg(data, checked_len(n, d)?, "data")?;
        let set = EmbeddingSet::from_row_major(n, d, values)?;
        *out = Box::into_raw(Box::new(NeEmbeddings(set)));
        Ok(())
    })
}

/// Reads an embedding file (CSV or the `EMB1` binary format).
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn ne_embeddings_load(
    path: *const c_char,
    out: *mut *mut NeEmbeddings,
) -> NeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let set = read_embeddings(path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(NeEmbeddings(set)));
        Ok(())
    })
}

/// Number of samples and dimension of an embedding set.
///
/// # Safety
/// `set` must be a live handle; out pointers may be null to skip a value.
#[no_mangle]
pub unsafe extern "C" fn ne_embeddings_shape(
    set: *const NeEmbeddings,
    n: *mut usize,
    d: *mut usize,
) -> NeStatus {
    guard(|| {
        let s = &borrow(set, "set")?.0;
        if let Some(n) = n.as_mut() {
            *n = s.n();
        }
        if let Some(d) = d.as_mut() {
            *d = s.d();
        }
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ne_embeddings_free(set: *mut NeEmbeddings) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Fréchet distance between Gaussians fitted to the two sets. `epsilon` is
/// the diagonal load applied when a covariance is near-singular.
///
/// # Safety
/// `generated` and `reference` must be live handles; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn ne_frechet_distance(
    generated: *const NeEmbeddings,
    reference: *const NeEmbeddings,
    epsilon: f64,
    out: *mut NeFrechet,
) -> NeStatus {
    guard(|| {
        let g = &borrow(generated, "generated")?.0;
        let r = &borrow(reference, "reference")?.0;
        let out = out_ref(out, "out")?;
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Failure(
                NeStatus::InvalidArgument,
                format!("epsilon must be finite and non-negative, got {epsilon}"),
            ));
        }
        let f = cvc_evaluate(g, r, epsilon)?.frechet;
        *out = NeFrechet {
            fid: f.fid,
            mean_term: f.mean_term,
            trace_term: f.trace_term,
            regularization_applied: f.regularization_applied as u8,
        };
        Ok(())
    })
}

/// `exp(-x / 200)` for `x >= 0`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ne_f1(x: f64, out: *mut f64) -> NeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = f1(x)?;
        Ok(())
    })
}

/// Overall score from the six dataset metrics.
///
/// # Safety
/// `raw` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ne_aggregate_overall(raw: *const NeRawMetrics, out: *mut f64) -> NeStatus {
    guard(|| {
        let raw = to_raw(borrow(raw, "raw")?);
        let out = out_ref(out, "out")?;
        *out = aggregate_overall(&raw)?.overall;
        Ok(())
    })
}

fn to_raw(r: &NeRawMetrics) -> RawMetricVector {
    RawMetricVector {
        cn: r.cn,
        sr: r.sr,
        la: r.la,
        bdp: r.bdp,
        mc: r.mc,
        ads: r.ads,
    }
}

/// Mask cross-attention loss over a `pixels x words` map stored row-major
/// (pixel-major).
///
/// # Safety
/// `values` must point to `pixels * words` doubles; `characters` to
/// `character_count` entries whose `words` and `target` arrays have
/// `word_count` and `pixels` elements; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ne_mask_attention_loss(
    values: *const f64,
    pixels: usize,
    words: usize,
    characters: *const NeCharacter,
    character_count: usize,
    lambda: f64,
    out: *mut f64,
) -> NeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let values = slice_arg(values, checked_len(pixels, words)?, "values")?;
        let map = AttentionMap::new(pixels, words, values.to_vec())?;
        let mut regions = Vec::with_capacity(character_count);
        for c in slice_arg(characters, character_count, "characters")? {
            let word_indices = slice_arg(c.words, c.word_count, "character words")?;
            let target = slice_arg(c.target, pixels, "character target")?;
            let inside = target
                .iter()
                .enumerate()
                .filter(|(_, &t)| t != 0)
                .map(|(p, _)| p);
            regions.push(CharacterRegion::new(
                word_indices.iter().copied(),
                inside,
                pixels,
            )?);
        }
        *out = mask_attention_loss(&map, &RegionSpec::new(regions), lambda)?;
        Ok(())
    })
}

/// Default evaluation options.
#[no_mangle]
pub extern "C" fn ne_options_default() -> NeOptions {
    let d = EvalOptions::default();
    NeOptions {
        skip_empty: d.skip_empty as u8,
        normalize_distances: d.normalize_distances as u8,
        epsilon: d.epsilon,
        threads: d.threads.unwrap_or(0),
    }
}

fn to_options(o: &NeOptions) -> EvalOptions {
    EvalOptions {
        skip_empty: o.skip_empty != 0,
        epsilon: o.epsilon,
        normalize_distances: o.normalize_distances != 0,
        threads: (o.threads != 0).then_some(o.threads),
    }
}

fn into_handle(report: MetricReport) -> Result<*mut NeReport, Failure> {
    let json = CString::new(report.to_json())
        .map_err(|_| Failure(NeStatus::Internal, "report JSON contains NUL".into()))?;
    Ok(Box::into_raw(Box::new(NeReport { report, json })))
}

/// Evaluates the manifest at `path`. `options` may be null for defaults.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `options` null or valid;
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ne_evaluate_manifest(
    path: *const c_char,
    options: *const NeOptions,
    out: *mut *mut NeReport,
) -> NeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let options = options.as_ref().map(to_options).unwrap_or_default();
        let manifest = EvaluationManifest::load(path_arg(path, "path")?)?;
        *out = into_handle(run_evaluation(&manifest, &options)?)?;
        Ok(())
    })
}

/// Builds a report directly from dataset metrics.
///
/// # Safety
/// `model_name` must be a NUL-terminated UTF-8 string; `raw` and `out` must
/// be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ne_report_from_raw(
    model_name: *const c_char,
    raw: *const NeRawMetrics,
    out: *mut *mut NeReport,
) -> NeStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let name = borrow(model_name, "model_name").map(|c| CStr::from_ptr(c))?;
        let name = name
            .to_str()
            .map_err(|_| Failure(NeStatus::InvalidArgument, "model_name is not UTF-8".into()))?;
        let raw = to_raw(borrow(raw, "raw")?);
        *out = into_handle(report_from_raw(name, &raw, &EvalOptions::default(), None)?)?;
        Ok(())
    })
}

/// The report as pretty JSON. The string is owned by the report and lives
/// until [`ne_report_free`]. Returns null for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ne_report_json(report: *const NeReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// Overall score of a report; `NotAvailable` when CN was not computed.
///
/// # Safety
/// `report` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ne_report_overall(report: *const NeReport, out: *mut f64) -> NeStatus {
    guard(|| {
        let r = &borrow(report, "report")?.report;
        let out = out_ref(out, "out")?;
        match r.overall {
            Some(o) => {
                *out = o.overall;
                Ok(())
            }
            None => Err(Failure(
                NeStatus::NotAvailable,
                "report has no overall score (CN absent)".into(),
            )),
        }
    })
}

/// # Safety
/// `report` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ne_report_free(report: *mut NeReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
