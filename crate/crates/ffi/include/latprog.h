#ifndef LATPROG_H
#define LATPROG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum LpStatus {
  LP_STATUS_OK = 0,
  LP_STATUS_NULL_POINTER = 1,
  LP_STATUS_INVALID_UTF8 = 2,
  LP_STATUS_IO = 3,
  LP_STATUS_FORMAT = 4,
  LP_STATUS_DIMENSION_MISMATCH = 5,
  LP_STATUS_INVALID_ARGUMENT = 6,
  LP_STATUS_NOT_ENOUGH_NEIGHBORS = 7,
  // Any other domain error; see `lp_last_error`.
  LP_STATUS_DOMAIN = 8,
  LP_STATUS_BUFFER_TOO_SMALL = 9,
  LP_STATUS_PANIC = 10,
} LpStatus;

// Rescaling of neighbour displacements to the horizon.
typedef enum LpScaling {
  // Factor `dt_i / horizon`.
  LP_SCALING_AS_WRITTEN = 0,
  // Factor `horizon / dt_i`.
  LP_SCALING_LINEAR_TIME = 1,
} LpScaling;

// Latent dictionary with its neighbour index.
typedef struct LpDictionary LpDictionary;

// Toy generator parameters.
typedef struct LpGan LpGan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *lp_version(void);

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *lp_last_error(void);

// Loads a latent store. On success `*out` owns a handle for `lp_dictionary_free`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum LpStatus lp_dictionary_load(const char *path, struct LpDictionary **out);

// # Safety
// `dict` must come from `lp_dictionary_load` and not be used afterwards. Null is ignored.
void lp_dictionary_free(struct LpDictionary *dict);

// Number of stored visits, or 0 for a null handle.
//
// # Safety
// `dict` must be null or a live handle.
uintptr_t lp_dictionary_len(const struct LpDictionary *dict);

// Latent dimension, or 0 for a null handle.
//
// # Safety
// `dict` must be null or a live handle.
uintptr_t lp_dictionary_dimension(const struct LpDictionary *dict);

// Moves `query` (length `dim`) along the mean displacement of its `m`
// nearest neighbours rescaled to `horizon_months`, writing `dim` values to
// `out_w`.
//
// # Safety
// Pointers must be valid for the stated lengths; `out_len` is the capacity of `out_w`.
enum LpStatus lp_extrapolate(const struct LpDictionary *dict,
                             const double *query,
                             uintptr_t dim,
                             uintptr_t m,
                             int64_t horizon_months,
                             enum LpScaling scaling,
                             double *out_w,
                             uintptr_t out_len);

// Distance between the unit-normalized vectors `a` and `b`.
//
// # Safety
// `a` and `b` must hold `dim` values; `out` must be valid.
enum LpStatus lp_normalized_cosine_distance(const double *a,
                                            const double *b,
                                            uintptr_t dim,
                                            double *out);

// Progress and stable probabilities from baseline and follow-up grade
// distributions of five values each.
//
// # Safety
// `p_baseline` and `p_followup` must hold five values; outputs must be valid.
enum LpStatus lp_progression_risk(const double *p_baseline,
                                  const double *p_followup,
                                  double *out_progress,
                                  double *out_stable);

// Area under the ROC curve; `labels` are 0 or non-zero.
//
// # Safety
// `scores` and `labels` must hold `n` values; `out` must be valid.
enum LpStatus lp_roc_auc(const double *scores, const uint8_t *labels, uintptr_t n, double *out);

// Loads a model file. On success `*out` owns a handle for `lp_gan_free`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum LpStatus lp_gan_load(const char *path, struct LpGan **out);

// # Safety
// `gan` must come from `lp_gan_load` and not be used afterwards. Null is ignored.
void lp_gan_free(struct LpGan *gan);

// Latent dimension, or 0 for a null handle.
//
// # Safety
// `gan` must be null or a live handle.
uintptr_t lp_gan_latent_dim(const struct LpGan *gan);

// Side length of generated images, or 0 for a null handle.
//
// # Safety
// `gan` must be null or a live handle.
uintptr_t lp_gan_image_size(const struct LpGan *gan);

// Renders latent `w` with all noise maps at zero into `out_pixels`
// (row-major, values in [0, 1]).
//
// # Safety
// `w` must hold `dim` values and `out_pixels` `out_len` values.
enum LpStatus lp_gan_generate(const struct LpGan *gan,
                              const double *w,
                              uintptr_t dim,
                              double *out_pixels,
                              uintptr_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LATPROG_H */
