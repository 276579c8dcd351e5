/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef CHRISTOFFEL_H
#define CHRISTOFFEL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes. `CF_STATUS_OK` is zero; everything else is a failure.
 */
typedef enum CfStatus {
  CF_STATUS_OK = 0,
  CF_STATUS_NULL_POINTER = 1,
  CF_STATUS_INVALID_ARGUMENT = 2,
  CF_STATUS_DATA = 3,
  CF_STATUS_NUMERICAL = 4,
  CF_STATUS_IO = 5,
  CF_STATUS_PANIC = 6,
} CfStatus;

/*
 Fitted classifier. Opaque to C.
 */
typedef struct CfModel CfModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Fits a model on `count` points of dimension `n`.

 `points` is row-major (`count * n` values); `labels` holds `count` labels
 in `1..=classes`. `degree = 0` selects the degree automatically. When
 `class_prior_weights` is nonzero each class gets mass `N_j / N`.
 On success `*out` receives a new handle.

 # Safety
 Pointers must be valid for the stated lengths; `out` must be writable.
 */
enum CfStatus cf_model_fit(size_t n,
                           const double *points,
                           const uint32_t *labels,
                           size_t count,
                           size_t classes,
                           uint32_t degree,
                           int32_t class_prior_weights,
                           struct CfModel **out);

/*
 Loads a model file written by `cf_model_save` or the command-line tool.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CfStatus cf_model_load(const char *path, struct CfModel **out);

/*
 # Safety
 `model` must come from this library; `path` must be NUL-terminated.
 */
enum CfStatus cf_model_save(const struct CfModel *model, const char *path);

/*
 Releases a handle. Null is ignored.

 # Safety
 `model` must come from this library and must not be used afterwards.
 */
void cf_model_free(struct CfModel *model);

/*
 Input dimension, or 0 for a null handle.

 # Safety
 `model` must be null or come from this library.
 */
size_t cf_model_dim(const struct CfModel *model);

/*
 Number of classes, or 0 for a null handle.

 # Safety
 `model` must be null or come from this library.
 */
size_t cf_model_num_classes(const struct CfModel *model);

/*
 Polynomial degree, or 0 for a null handle.

 # Safety
 `model` must be null or come from this library.
 */
uint32_t cf_model_degree(const struct CfModel *model);

/*
 Writes the per-class scores `Lambda_1(x) .. Lambda_m(x)` to `scores`,
 which must hold `len >= m` values.

 # Safety
 `x` must hold `n` values and `scores` `len` writable values.
 */
enum CfStatus cf_model_scores(const struct CfModel *model,
                              const double *x,
                              size_t n,
                              double *scores,
                              size_t len);

/*
 Writes the predicted class (1-based) to `label`, or 0 when the model
 rejects the point.

 # Safety
 `x` must hold `n` values; `label` must be writable.
 */
enum CfStatus cf_model_classify(const struct CfModel *model,
                                const double *x,
                                size_t n,
                                uint32_t *label);

/*
 Message for the last failed call on this thread, or null if the last
 call succeeded. Valid until the next call into this library.
 */
const char *cf_last_error_message(void);

/*
 Static description of a status code.
 */
const char *cf_status_message(enum CfStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHRISTOFFEL_H */
