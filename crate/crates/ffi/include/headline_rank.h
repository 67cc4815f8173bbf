#ifndef HEADLINE_RANK_H
#define HEADLINE_RANK_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HrLabel {
  HR_LABEL_LEFT = 0,
  HR_LABEL_RIGHT = 1,
  HR_LABEL_DRAW = 2,
  HR_LABEL_BAD = 3,
} HrLabel;

typedef enum HrNormalization {
  HR_NORMALIZATION_NONE = 0,
  HR_NORMALIZATION_ZSCORE = 1,
} HrNormalization;

typedef enum HrPoolingMethod {
  HR_POOLING_METHOD_MEAN = 0,
  HR_POOLING_METHOD_CLS = 1,
} HrPoolingMethod;

// Result codes.
typedef enum HrStatus {
  HR_STATUS_OK = 0,
  HR_STATUS_NULL_POINTER = 1,
  HR_STATUS_INVALID_UTF8 = 2,
  HR_STATUS_IO = 3,
  HR_STATUS_FORMAT = 4,
  HR_STATUS_INVALID_ARGUMENT = 5,
  HR_STATUS_NOT_FOUND = 6,
  HR_STATUS_UNDEFINED = 7,
  HR_STATUS_PANIC = 8,
} HrStatus;

// Blend under construction: members are copied in by [`hr_blend_add`].
typedef struct HrBlend HrBlend;

// Sentence-embedding table.
typedef struct HrEmbeddings HrEmbeddings;

// Trained ranker.
typedef struct HrModel HrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread, or "".
// The pointer stays valid until the next failing call on the same thread.
const char *hr_last_error(void);

// Load an HSE1 file. On success `*out` owns a new handle.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum HrStatus hr_embeddings_load(const char *path, struct HrEmbeddings **out);

// # Safety
// `handle` must come from [`hr_embeddings_load`] and not be freed twice. NULL is ignored.
void hr_embeddings_free(struct HrEmbeddings *handle);

// Vector dimension, or 0 for NULL.
//
// # Safety
// `handle` must be NULL or a live embeddings handle.
uintptr_t hr_embeddings_dim(const struct HrEmbeddings *handle);

// Number of rows, or 0 for NULL.
//
// # Safety
// `handle` must be NULL or a live embeddings handle.
uintptr_t hr_embeddings_len(const struct HrEmbeddings *handle);

// Copy the vector of headline `id` into `buf` (`buf_len` must equal the dim).
//
// # Safety
// `handle` must be live, `id` NUL-terminated, `buf` writable for `buf_len` floats.
enum HrStatus hr_embeddings_get(const struct HrEmbeddings *handle,
                                const char *id,
                                float *buf,
                                uintptr_t buf_len);

// Load a JSON model file.
//
// # Safety
// `path` must be NUL-terminated; `out` must be writable.
enum HrStatus hr_model_load(const char *path, struct HrModel **out);

// # Safety
// `handle` must come from [`hr_model_load`] and not be freed twice. NULL is ignored.
void hr_model_free(struct HrModel *handle);

// Input dimension, or 0 for NULL.
//
// # Safety
// `handle` must be NULL or a live model handle.
uintptr_t hr_model_dim(const struct HrModel *handle);

// Number of trees kept after early stopping, or 0 for NULL.
//
// # Safety
// `handle` must be NULL or a live model handle.
uintptr_t hr_model_num_trees(const struct HrModel *handle);

// Rank score of one sentence vector.
//
// # Safety
// `handle` must be live, `x` readable for `len` floats, `out` writable.
enum HrStatus hr_model_score(const struct HrModel *handle,
                             const float *x,
                             uintptr_t len,
                             double *out);

// Create an empty blend. `normalization` is an [`HrNormalization`] value.
//
// # Safety
// `out` must be writable.
enum HrStatus hr_blend_new(int32_t normalization, double draw_threshold, struct HrBlend **out);

// # Safety
// `handle` must come from [`hr_blend_new`] and not be freed twice. NULL is ignored.
void hr_blend_free(struct HrBlend *handle);

// Append a (model, embeddings) member. Both are copied; the caller keeps ownership.
//
// # Safety
// All handles must be live.
enum HrStatus hr_blend_add(struct HrBlend *blend,
                           const struct HrModel *model,
                           const struct HrEmbeddings *embeddings);

// Predict every pair of a JSON Lines pairs file and write a predictions file.
//
// # Safety
// `blend` must be live, paths NUL-terminated, `out_count` NULL or writable.
enum HrStatus hr_blend_predict_file(const struct HrBlend *blend,
                                    const char *pairs_path,
                                    const char *out_path,
                                    uintptr_t *out_count);

// Blended ranks of one pair, normalized over `pool` (which must contain both ids),
// and the resulting label.
//
// # Safety
// `blend` must be live; `left_id`, `right_id` and the `pool_len` entries of `pool`
// must be NUL-terminated strings; outputs must be writable.
enum HrStatus hr_blend_pair(const struct HrBlend *blend,
                            const char *left_id,
                            const char *right_id,
                            const char *const *pool,
                            uintptr_t pool_len,
                            double *out_r_left,
                            double *out_r_right,
                            enum HrLabel *out_label);

// Three-way decision from two blended ranks. Never returns `BAD`.
enum HrLabel hr_decide_label(double r_left, double r_right, double draw_threshold);

// Pool an HST1 token file into an HSE1 file. `method` is an [`HrPoolingMethod`] value.
//
// # Safety
// Paths must be NUL-terminated; `out_rows`/`out_dim` may be NULL.
enum HrStatus hr_pool_file(const char *token_path,
                           int32_t method,
                           const char *out_path,
                           uintptr_t *out_rows,
                           uintptr_t *out_dim);

// Pairwise logistic loss; `positive[i]`, `negative[i]` index into `scores`.
//
// # Safety
// `scores` readable for `n_scores`, `positive`/`negative` for `n_pairs`, `out` writable.
enum HrStatus hr_pair_logit_loss(const double *scores,
                                 uintptr_t n_scores,
                                 const uintptr_t *positive,
                                 const uintptr_t *negative,
                                 uintptr_t n_pairs,
                                 double *out);

// Weighted three-way accuracy over label codes. Gold `BAD` rows are skipped;
// returns `UNDEFINED` when nothing is left to score.
//
// # Safety
// `gold` and `pred` readable for `n` values, `out` writable.
enum HrStatus hr_weighted_accuracy(const int32_t *gold,
                                   const int32_t *pred,
                                   uintptr_t n,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEADLINE_RANK_H */
