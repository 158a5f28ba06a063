#ifndef DENSIFY_H
#define DENSIFY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define DENSIFY_SCENARIO_RAW 0

#define DENSIFY_SCENARIO_ENHANCED 1

#define DENSIFY_MODEL_NAIVE_BAYES 0

#define DENSIFY_MODEL_RANDOM_FOREST 1

#define DENSIFY_MODEL_MLP2 2

typedef enum DensifyStatus {
  DENSIFY_STATUS_OK = 0,
  DENSIFY_STATUS_NULL_POINTER = 1,
  DENSIFY_STATUS_INVALID_UTF8 = 2,
  DENSIFY_STATUS_IO = 3,
  DENSIFY_STATUS_VERSION_MISMATCH = 4,
  DENSIFY_STATUS_CORRUPT_ARTIFACT = 5,
  DENSIFY_STATUS_INVALID_ARGUMENT = 6,
  DENSIFY_STATUS_BUFFER_TOO_SMALL = 7,
  DENSIFY_STATUS_NOT_FOUND = 8,
  DENSIFY_STATUS_INTERNAL = 9,
} DensifyStatus;

/**
 * Opaque loaded artifact.
 */
typedef struct DensifyArtifact DensifyArtifact;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *densify_version(void);

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *densify_last_error(void);

/**
 * Loads an artifact file. On success `*out` owns a handle.
 */
enum DensifyStatus densify_artifact_load(const char *path, struct DensifyArtifact **out);

/**
 * Releases a handle. NULL is ignored.
 */
void densify_artifact_free(struct DensifyArtifact *artifact);

/**
 * Number of classes, or 0 for NULL.
 */
size_t densify_artifact_n_classes(const struct DensifyArtifact *artifact);

/**
 * Class name at `index`, owned by the handle; NULL when out of range.
 */
const char *densify_artifact_class_name(const struct DensifyArtifact *artifact, size_t index);

/**
 * Scores `n_texts` UTF-8 strings. Writes `n_texts * n_classes` probabilities
 * row-major into `out`, which must hold at least that many values.
 */
enum DensifyStatus densify_artifact_predict_proba(const struct DensifyArtifact *artifact,
                                                  const char *const *texts,
                                                  size_t n_texts,
                                                  uint32_t scenario_code,
                                                  uint32_t model_code,
                                                  double *out,
                                                  size_t out_len);

/**
 * Fraction of exact zeros among `len` values.
 */
enum DensifyStatus densify_sparsity(const double *values, size_t len, double *out);

/**
 * `(i + offset) mod modulus`.
 */
enum DensifyStatus densify_loop_modulus_index(size_t i, size_t offset, size_t modulus, size_t *out);

/**
 * Area under the ROC curve for binary `labels` (non-zero = positive).
 */
enum DensifyStatus densify_roc_auc(const double *scores,
                                   const uint8_t *labels,
                                   size_t n,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DENSIFY_H */
