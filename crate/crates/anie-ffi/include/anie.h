#ifndef ANIE_H
#define ANIE_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes; aligned with the CLI exit codes.
 */
typedef enum AnieStatus {
  ANIE_STATUS_OK = 0,
  /**
   * Invalid argument or misuse (null handle, bad parameter).
   */
  ANIE_STATUS_USAGE = 2,
  /**
   * Input data could not be read or validated.
   */
  ANIE_STATUS_DATA = 3,
  /**
   * Numeric failure inside the solver.
   */
  ANIE_STATUS_NUMERIC = 4,
} AnieStatus;

/**
 * Opaque event stream handle.
 */
typedef struct AnieEvents AnieEvents;

/**
 * Opaque fitted model handle.
 */
typedef struct AnieModel AnieModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a C string; the pointer is static.
 */
const char *anie_version(void);

/**
 * Message of the most recent failure on this thread, or null when none.
 * Free with `anie_string_free`.
 */
char *anie_last_error_message(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed before.
 */
void anie_string_free(char *s);

/**
 * Builds an event stream from parallel arrays of length `len`.
 * `directed = 0` mirrors every off-diagonal event.
 *
 * # Safety
 * `us`, `vs`, `ts` must point to `len` readable elements.
 */
struct AnieEvents *anie_events_from_arrays(uintptr_t n_nodes,
                                           double horizon,
                                           const uint32_t *us,
                                           const uint32_t *vs,
                                           const double *ts,
                                           uintptr_t len,
                                           int32_t directed);

/**
 * Loads an edge-list CSV (header `u,v,t`), honoring a JSON sidecar when
 * present next to the file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string.
 */
struct AnieEvents *anie_events_load_csv(const char *path);

/**
 * Samples the ER-blocks generative model.
 */
struct AnieEvents *anie_simulate_er_blocks(uintptr_t n_nodes,
                                           double scale,
                                           double offset,
                                           uint64_t seed);

/**
 * Samples the two-community DSBM.
 */
struct AnieEvents *anie_simulate_dsbm(uintptr_t n_nodes,
                                      double lambda_intra,
                                      double lambda_inter,
                                      double merge_start,
                                      double merge_end,
                                      uint64_t seed);

/**
 * Number of events in the stream.
 *
 * # Safety
 * `events` must be a live handle from this library.
 */
uintptr_t anie_events_len(const struct AnieEvents *events);

/**
 * Node count of the stream.
 *
 * # Safety
 * `events` must be a live handle from this library.
 */
uintptr_t anie_events_n_nodes(const struct AnieEvents *events);

/**
 * Frees an event stream handle.
 *
 * # Safety
 * `events` must come from this library and not have been freed before.
 */
void anie_events_free(struct AnieEvents *events);

/**
 * Fits the multiresolution intensity model: Haar basis with `levels` detail
 * levels, subspace rank `rank`, FDR level `alpha`.
 *
 * # Safety
 * `events` must be a live handle from this library.
 */
struct AnieModel *anie_fit(const struct AnieEvents *events,
                           uint32_t levels,
                           uintptr_t rank,
                           double alpha,
                           uint64_t seed);

/**
 * Subspace rank of a fitted model.
 *
 * # Safety
 * `model` must be a live handle from this library.
 */
uintptr_t anie_model_rank(const struct AnieModel *model);

/**
 * Node count of a fitted model.
 *
 * # Safety
 * `model` must be a live handle from this library.
 */
uintptr_t anie_model_n_nodes(const struct AnieModel *model);

/**
 * Reconstructed intensity for pair `(u, v)` at time `t` in [0, 1].
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum AnieStatus anie_model_intensity(const struct AnieModel *model,
                                     uintptr_t u,
                                     uintptr_t v,
                                     double t,
                                     double *out);

/**
 * Copies up to `cap` retained singular values into `out`; stores the number
 * written through `written`.
 *
 * # Safety
 * `out` must have room for `cap` values; `written` must be writable.
 */
enum AnieStatus anie_model_singular_values(const struct AnieModel *model,
                                           double *out,
                                           uintptr_t cap,
                                           uintptr_t *written);

/**
 * Writes the scale-`level` anomaly scores (one per dyadic cell, `2^level`
 * values) into `out`. `thresholded != 0` scores surviving coefficients
 * only; otherwise raw coefficients are used.
 *
 * # Safety
 * `out` must have room for `cap` values; `written` must be writable.
 */
enum AnieStatus anie_model_anomaly_scores(const struct AnieModel *model,
                                          uint32_t level,
                                          int32_t thresholded,
                                          double *out,
                                          uintptr_t cap,
                                          uintptr_t *written);

/**
 * Saves the fitted model as a bundle directory (subspace.csv, scree.csv,
 * affinity.json, mask.json, manifest.json).
 *
 * # Safety
 * `model` must be a live handle; `dir` a valid NUL-terminated string.
 */
enum AnieStatus anie_model_save(const struct AnieModel *model, const char *dir);

/**
 * Loads a fitted model from a bundle directory.
 *
 * # Safety
 * `dir` must be a valid NUL-terminated string.
 */
struct AnieModel *anie_model_load(const char *dir);

/**
 * Frees a model handle.
 *
 * # Safety
 * `model` must come from this library and not have been freed before.
 */
void anie_model_free(struct AnieModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANIE_H */
