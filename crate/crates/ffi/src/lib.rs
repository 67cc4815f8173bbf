//! C ABI over the headline-rank engine.
//!
//! Every fallible function returns an [`HrStatus`]; on failure a message is
//! available from [`hr_last_error`] on the same thread. Objects are handed out
//! as opaque pointers and must be released with the matching `*_free`.
//! Label and enum arguments are passed as plain integers holding the values
//! of [`HrLabel`], [`HrNormalization`] and [`HrPoolingMethod`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use headline_rank::ensemble::{self, BlendMember, BlendSpec, Normalization, PairScores};
use headline_rank::evaluation;
use headline_rank::pooling::{self, PoolingMethod};
use headline_rank::ranker::{self, RankerModel};
use headline_rank::{data, EmbeddingStore, Error, Label};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    InvalidArgument = 5,
    NotFound = 6,
    Undefined = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrLabel {
    Left = 0,
    Right = 1,
    Draw = 2,
    Bad = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrNormalization {
    None = 0,
    Zscore = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrPoolingMethod {
    Mean = 0,
    Cls = 1,
}

impl From<Label> for HrLabel {
    fn from(l: Label) -> Self {
        match l {
            Label::Left => HrLabel::Left,
            Label::Right => HrLabel::Right,
            Label::Draw => HrLabel::Draw,
            Label::Bad => HrLabel::Bad,
        }
    }
}

fn label_from_code(code: i32) -> Option<Label> {
    match code {
        0 => Some(Label::Left),
        1 => Some(Label::Right),
        2 => Some(Label::Draw),
        3 => Some(Label::Bad),
        _ => None,
    }
}

/// Sentence-embedding table.
pub struct HrEmbeddings(EmbeddingStore);

/// Trained ranker.
pub struct HrModel(RankerModel);

/// Blend under construction: members are copied in by [`hr_blend_add`].
pub struct HrBlend {
    members: Vec<BlendMember>,
    normalization: Normalization,
    draw_threshold: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

/// Message describing the most recent failure on this thread, or "".
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

struct Failure(HrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => HrStatus::Io,
            Error::MissingEmbedding(_) | Error::MissingMemberEmbedding { .. } => HrStatus::NotFound,
            Error::MetricUndefined => HrStatus::Undefined,
            Error::MalformedLine { .. }
            | Error::UnknownLabel { .. }
            | Error::BadMagic { .. }
            | Error::UnsupportedVersion { .. }
            | Error::Format(_)
            | Error::DuplicateId(_)
            | Error::Schema(_) => HrStatus::Format,
            _ => HrStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(HrStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside headline-rank");
            HrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(HrStatus::NullPointer, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(HrStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(HrStatus::NullPointer, format!("{name} is NULL")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure(HrStatus::NullPointer, format!("{name} is NULL")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(p: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure(HrStatus::NullPointer, format!("{name} is NULL")));
    }
    p.write(value);
    Ok(())
}

fn out_is_null<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(HrStatus::NullPointer, format!("{name} is NULL")))
    } else {
        Ok(())
    }
}

// ---- embeddings -----------------------------------------------------------

/// Load an HSE1 file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_embeddings_load(path: *const c_char, out: *mut *mut HrEmbeddings) -> HrStatus {
    guard(|| {
        out_is_null(out, "out")?;
        let path = str_arg(path, "path")?;
        let store = data::load_embeddings(path)?;
        write_out(out, Box::into_raw(Box::new(HrEmbeddings(store))), "out")
    })
}

/// # Safety
/// `handle` must come from [`hr_embeddings_load`] and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn hr_embeddings_free(handle: *mut HrEmbeddings) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Vector dimension, or 0 for NULL.
///
/// # Safety
/// `handle` must be NULL or a live embeddings handle.
#[no_mangle]
pub unsafe extern "C" fn hr_embeddings_dim(handle: *const HrEmbeddings) -> usize {
    handle.as_ref().map_or(0, |h| h.0.dim())
}

/// Number of rows, or 0 for NULL.
///
/// # Safety
/// `handle` must be NULL or a live embeddings handle.
#[no_mangle]
pub unsafe extern "C" fn hr_embeddings_len(handle: *const HrEmbeddings) -> usize {
    handle.as_ref().map_or(0, |h| h.0.len())
}

/// Copy the vector of headline `id` into `buf` (`buf_len` must equal the dim).
///
/// # Safety
/// `handle` must be live, `id` NUL-terminated, `buf` writable for `buf_len` floats.
#[no_mangle]
pub unsafe extern "C" fn hr_embeddings_get(
    handle: *const HrEmbeddings,
    id: *const c_char,
    buf: *mut f32,
    buf_len: usize,
) -> HrStatus {
    guard(|| {
        let store = &ref_arg(handle, "handle")?.0;
        let id = str_arg(id, "id")?;
        out_is_null(buf, "buf")?;
        if buf_len != store.dim() {
            return Err(invalid(format!(
                "buffer holds {buf_len} floats, dim is {}",
                store.dim()
            )));
        }
        let row = store
            .get(id)
            .ok_or_else(|| Failure(HrStatus::NotFound, format!("no embedding for {id:?}")))?;
        ptr::copy_nonoverlapping(row.as_ptr(), buf, row.len());
        Ok(())
    })
}

// ---- models ---------------------------------------------------------------

/// Load a JSON model file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_model_load(path: *const c_char, out: *mut *mut HrModel) -> HrStatus {
    guard(|| {
        out_is_null(out, "out")?;
        let model = ranker::load_model(str_arg(path, "path")?)?;
        write_out(out, Box::into_raw(Box::new(HrModel(model))), "out")
    })
}

/// # Safety
/// `handle` must come from [`hr_model_load`] and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn hr_model_free(handle: *mut HrModel) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Input dimension, or 0 for NULL.
///
/// # Safety
/// `handle` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn hr_model_dim(handle: *const HrModel) -> usize {
    handle.as_ref().map_or(0, |h| h.0.dim)
}

/// Number of trees kept after early stopping, or 0 for NULL.
///
/// # Safety
/// `handle` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn hr_model_num_trees(handle: *const HrModel) -> usize {
    handle.as_ref().map_or(0, |h| h.0.trees.len())
}

/// Rank score of one sentence vector.
///
/// # Safety
/// `handle` must be live, `x` readable for `len` floats, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hr_model_score(handle: *const HrModel, x: *const f32, len: usize, out: *mut f64) -> HrStatus {
    guard(|| {
        let model = &ref_arg(handle, "handle")?.0;
        let x = slice_arg(x, len, "x")?;
        let s = model.score(x)?;
        write_out(out, s, "out")
    })
}

// ---- blending -------------------------------------------------------------

/// Create an empty blend. `normalization` is an [`HrNormalization`] value.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_blend_new(normalization: i32, draw_threshold: f64, out: *mut *mut HrBlend) -> HrStatus {
    guard(|| {
        out_is_null(out, "out")?;
        let normalization = match normalization {
            0 => Normalization::None,
            1 => Normalization::ZScore,
            other => return Err(invalid(format!("unknown normalization code {other}"))),
        };
        if !(draw_threshold.is_finite() && draw_threshold >= 0.0) {
            return Err(invalid("draw threshold must be non-negative"));
        }
        let blend = HrBlend {
            members: Vec::new(),
            normalization,
            draw_threshold,
        };
        write_out(out, Box::into_raw(Box::new(blend)), "out")
    })
}

/// # Safety
/// `handle` must come from [`hr_blend_new`] and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn hr_blend_free(handle: *mut HrBlend) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Append a (model, embeddings) member. Both are copied; the caller keeps ownership.
///
/// # Safety
/// All handles must be live.
#[no_mangle]
pub unsafe extern "C" fn hr_blend_add(
    blend: *mut HrBlend,
    model: *const HrModel,
    embeddings: *const HrEmbeddings,
) -> HrStatus {
    guard(|| {
        let blend = blend
            .as_mut()
            .ok_or_else(|| Failure(HrStatus::NullPointer, "blend is NULL".into()))?;
        let model = &ref_arg(model, "model")?.0;
        let store = &ref_arg(embeddings, "embeddings")?.0;
        if model.dim != store.dim() {
            return Err(invalid(format!(
                "model dim {} != embedding dim {}",
                model.dim,
                store.dim()
            )));
        }
        blend.members.push(BlendMember {
            model: model.clone(),
            store: store.clone(),
        });
        Ok(())
    })
}

fn spec_of(blend: &HrBlend) -> Result<BlendSpec, Failure> {
    Ok(BlendSpec::new(
        blend.members.clone(),
        blend.normalization,
        blend.draw_threshold,
    )?)
}

/// Predict every pair of a JSON Lines pairs file and write a predictions file.
///
/// # Safety
/// `blend` must be live, paths NUL-terminated, `out_count` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn hr_blend_predict_file(
    blend: *const HrBlend,
    pairs_path: *const c_char,
    out_path: *const c_char,
    out_count: *mut usize,
) -> HrStatus {
    guard(|| {
        let spec = spec_of(ref_arg(blend, "blend")?)?;
        let dataset = data::load_pairs(str_arg(pairs_path, "pairs_path")?)?;
        let preds = ensemble::predict_dataset(&spec, &dataset)?;
        ensemble::write_predictions(&preds, str_arg(out_path, "out_path")?)?;
        if !out_count.is_null() {
            out_count.write(preds.len());
        }
        Ok(())
    })
}

/// Blended ranks of one pair, normalized over `pool` (which must contain both ids),
/// and the resulting label.
///
/// # Safety
/// `blend` must be live; `left_id`, `right_id` and the `pool_len` entries of `pool`
/// must be NUL-terminated strings; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_blend_pair(
    blend: *const HrBlend,
    left_id: *const c_char,
    right_id: *const c_char,
    pool: *const *const c_char,
    pool_len: usize,
    out_r_left: *mut f64,
    out_r_right: *mut f64,
    out_label: *mut HrLabel,
) -> HrStatus {
    guard(|| {
        let blend = ref_arg(blend, "blend")?;
        out_is_null(out_r_left, "out_r_left")?;
        out_is_null(out_r_right, "out_r_right")?;
        out_is_null(out_label, "out_label")?;
        let spec = spec_of(blend)?;
        let left = str_arg(left_id, "left_id")?;
        let right = str_arg(right_id, "right_id")?;
        let pool = slice_arg(pool, pool_len, "pool")?
            .iter()
            .map(|&p| str_arg(p, "pool entry").map(str::to_owned))
            .collect::<Result<Vec<_>, _>>()?;
        let scores = ensemble::blend_pair(&spec, left, right, &pool)?;
        out_r_left.write(scores.r_left);
        out_r_right.write(scores.r_right);
        out_label.write(ensemble::decide_label(scores, spec.draw_threshold).into());
        Ok(())
    })
}

// ---- stateless helpers ----------------------------------------------------

/// Three-way decision from two blended ranks. Never returns `BAD`.
#[no_mangle]
pub extern "C" fn hr_decide_label(r_left: f64, r_right: f64, draw_threshold: f64) -> HrLabel {
    ensemble::decide_label(PairScores { r_left, r_right }, draw_threshold).into()
}

/// Pool an HST1 token file into an HSE1 file. `method` is an [`HrPoolingMethod`] value.
///
/// # Safety
/// Paths must be NUL-terminated; `out_rows`/`out_dim` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn hr_pool_file(
    token_path: *const c_char,
    method: i32,
    out_path: *const c_char,
    out_rows: *mut usize,
    out_dim: *mut usize,
) -> HrStatus {
    guard(|| {
        let method = match method {
            0 => PoolingMethod::MeanOverTokens,
            1 => PoolingMethod::FirstToken,
            other => return Err(invalid(format!("unknown pooling method code {other}"))),
        };
        let (rows, dim) = pooling::pool_file(
            str_arg(token_path, "token_path")?,
            method,
            str_arg(out_path, "out_path")?,
        )?;
        if !out_rows.is_null() {
            out_rows.write(rows);
        }
        if !out_dim.is_null() {
            out_dim.write(dim);
        }
        Ok(())
    })
}

/// Pairwise logistic loss; `positive[i]`, `negative[i]` index into `scores`.
///
/// # Safety
/// `scores` readable for `n_scores`, `positive`/`negative` for `n_pairs`, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hr_pair_logit_loss(
    scores: *const f64,
    n_scores: usize,
    positive: *const usize,
    negative: *const usize,
    n_pairs: usize,
    out: *mut f64,
) -> HrStatus {
    guard(|| {
        let scores = slice_arg(scores, n_scores, "scores")?;
        let pos = slice_arg(positive, n_pairs, "positive")?;
        let neg = slice_arg(negative, n_pairs, "negative")?;
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(invalid("scores must be finite"));
        }
        let pairs: Vec<(usize, usize)> = pos.iter().copied().zip(neg.iter().copied()).collect();
        if pairs.iter().any(|&(p, n)| p >= n_scores || n >= n_scores) {
            return Err(invalid("pair index out of range"));
        }
        write_out(out, ranker::pair_logit_loss(scores, &pairs), "out")
    })
}

/// Weighted three-way accuracy over label codes. Gold `BAD` rows are skipped;
/// returns `UNDEFINED` when nothing is left to score.
///
/// # Safety
/// `gold` and `pred` readable for `n` values, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hr_weighted_accuracy(gold: *const i32, pred: *const i32, n: usize, out: *mut f64) -> HrStatus {
    guard(|| {
        let decode = |codes: &[i32], name: &str| {
            codes
                .iter()
                .map(|&c| label_from_code(c).ok_or_else(|| invalid(format!("{name}: unknown label code {c}"))))
                .collect::<Result<Vec<_>, _>>()
        };
        let gold = decode(slice_arg(gold, n, "gold")?, "gold")?;
        let pred = decode(slice_arg(pred, n, "pred")?, "pred")?;
        write_out(out, evaluation::weighted_accuracy(&gold, &pred)?, "out")
    })
}
