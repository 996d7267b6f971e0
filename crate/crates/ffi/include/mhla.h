#ifndef MHLA_H
#define MHLA_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MhlaStatus {
  MHLA_STATUS_OK = 0,
  MHLA_STATUS_NULL_POINTER = 1,
  MHLA_STATUS_INVALID_ARGUMENT = 2,
  MHLA_STATUS_NUMERIC = 3,
  MHLA_STATUS_DOMAIN = 4,
  MHLA_STATUS_COMPILE = 5,
  MHLA_STATUS_IO = 6,
  MHLA_STATUS_PARSE = 7,
  MHLA_STATUS_PANIC = 8,
} MhlaStatus;

/**
 * In-memory dataset.
 */
typedef struct MhlaDatasetHandle MhlaDatasetHandle;

/**
 * Learned or ground-truth attention parameters.
 */
typedef struct MhlaParamsHandle MhlaParamsHandle;

typedef struct MhlaCertificate {
  size_t psi;
  size_t samples;
  double lambda_min;
  double lambda_max;
  double threshold_used;
  size_t rank_estimate;
  bool identifiable;
} MhlaCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next call on this thread.
 */
const char *mhla_last_error(void);

/**
 * Static, nul-terminated library version.
 */
const char *mhla_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void mhla_string_free(char *s);

/**
 * Parses params from JSON.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum MhlaStatus mhla_params_from_json(const char *json, struct MhlaParamsHandle **out_params);

/**
 * Serializes params to JSON; free the result with [`mhla_string_free`].
 *
 * # Safety
 * `params` must be a live handle; `out_json` must be writable.
 */
enum MhlaStatus mhla_params_to_json(const struct MhlaParamsHandle *params, char **out_json);

/**
 * # Safety
 * `params` must be null or a live handle not used afterwards.
 */
void mhla_params_free(struct MhlaParamsHandle *params);

/**
 * Embedding dimension, or 0 for a null handle.
 *
 * # Safety
 * `params` must be null or a live handle.
 */
size_t mhla_params_dim(const struct MhlaParamsHandle *params);

/**
 * Number of heads, or 0 for a null handle.
 *
 * # Safety
 * `params` must be null or a live handle.
 */
size_t mhla_params_head_count(const struct MhlaParamsHandle *params);

/**
 * Output at the last position of `z`, a row-major `d x n` matrix; writes `d` values to `out`.
 *
 * # Safety
 * `z` must hold `d * n` readable values and `out` `d` writable values.
 */
enum MhlaStatus mhla_params_forward_last(const struct MhlaParamsHandle *params,
                                         const double *z,
                                         size_t n,
                                         double *out_y);

/**
 * Reads a JSON-lines dataset.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out_data` must be writable.
 */
enum MhlaStatus mhla_dataset_read(const char *path, struct MhlaDatasetHandle **out_data);

/**
 * Samples a random ground truth and a realizable dataset. `out_truth` may be null.
 *
 * # Safety
 * `out_data` must be writable; `out_truth` must be null or writable.
 */
enum MhlaStatus mhla_dataset_gen_random(size_t d,
                                        size_t n_max,
                                        size_t samples,
                                        size_t heads,
                                        uint64_t seed,
                                        struct MhlaDatasetHandle **out_data,
                                        struct MhlaParamsHandle **out_truth);

/**
 * # Safety
 * `data` must be null or a live handle not used afterwards.
 */
void mhla_dataset_free(struct MhlaDatasetHandle *data);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `data` must be null or a live handle.
 */
size_t mhla_dataset_len(const struct MhlaDatasetHandle *data);

/**
 * Embedding dimension, or 0 for a null handle.
 *
 * # Safety
 * `data` must be null or a live handle.
 */
size_t mhla_dataset_dim(const struct MhlaDatasetHandle *data);

/**
 * Regression fit with SVD fold-back. A negative `ridge` selects the automatic ridge.
 * `out_train_mse` may be null.
 *
 * # Safety
 * `data` must be a live handle; `out_params` must be writable; `out_train_mse` null or writable.
 */
enum MhlaStatus mhla_fit_regression(const struct MhlaDatasetHandle *data,
                                    double ridge,
                                    struct MhlaParamsHandle **out_params,
                                    double *out_train_mse);

/**
 * Identifiability certificate of a dataset.
 *
 * # Safety
 * `data` must be a live handle; `out_cert` must be writable.
 */
enum MhlaStatus mhla_certify(const struct MhlaDatasetHandle *data,
                             struct MhlaCertificate *out_cert);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MHLA_H */
