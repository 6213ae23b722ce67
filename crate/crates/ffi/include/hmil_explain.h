#ifndef HMIL_EXPLAIN_H
#define HMIL_EXPLAIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HmilStatus {
  HMIL_STATUS_OK = 0,
  HMIL_STATUS_NULL_ARGUMENT = 1,
  HMIL_STATUS_INVALID_UTF8 = 2,
  HMIL_STATUS_PARSE = 3,
  HMIL_STATUS_SCHEMA_MISMATCH = 4,
  HMIL_STATUS_MODEL_FORMAT = 5,
  HMIL_STATUS_INVALID_METHOD = 6,
  HMIL_STATUS_INCONSISTENT_INPUT = 7,
  HMIL_STATUS_IO = 8,
  HMIL_STATUS_INVALID_ARGUMENT = 9,
  HMIL_STATUS_INTERNAL = 10,
} HmilStatus;

/**
 * Opaque trained model.
 */
typedef struct HmilModelHandle HmilModelHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the next
 * call into this library from the same thread.
 */
const char *hmil_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *hmil_version(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be used afterwards.
 */
void hmil_string_free(char *s);

/**
 * Infers a schema from JSON-lines text and returns it as JSON.
 *
 * # Safety
 * `jsonl` must be a NUL-terminated string; `out_json` must be writable.
 */
enum HmilStatus hmil_infer_schema(const char *jsonl, char **out_json);

/**
 * Loads a model from a model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum HmilStatus hmil_model_load(const char *path, struct HmilModelHandle **out);

/**
 * Loads a model from the JSON text of a model file.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum HmilStatus hmil_model_from_json(const char *json, struct HmilModelHandle **out);

/**
 * Releases a model. NULL is ignored.
 *
 * # Safety
 * `model` must come from this library and must not be used afterwards.
 */
void hmil_model_free(struct HmilModelHandle *model);

/**
 * Confidence (positive minus negative class probability) of a JSON sample.
 *
 * # Safety
 * `model` must be a live handle, `sample_json` a NUL-terminated string and
 * `out_confidence` writable.
 */
enum HmilStatus hmil_model_classify(const struct HmilModelHandle *model,
                                    const char *sample_json,
                                    double *out_confidence);

/**
 * Inference and gradient counts accumulated by `model`.
 *
 * # Safety
 * `model` must be a live handle; the out-parameters must be writable.
 */
enum HmilStatus hmil_model_counters(const struct HmilModelHandle *model,
                                    uint64_t *out_inferences,
                                    uint64_t *out_gradients);

/**
 * Explains a JSON sample with a method such as `"lbyl-banz-add+rr+ft"`.
 * Writes the pruned document and, if `out_metadata_json` is not NULL, a
 * metadata document with confidence, threshold, size and counts.
 *
 * # Safety
 * `model` must be a live handle, the strings NUL-terminated, and
 * `out_pruned_json` writable.
 */
enum HmilStatus hmil_explain(const struct HmilModelHandle *model,
                             const char *sample_json,
                             const char *method,
                             double tau_factor,
                             uint64_t seed,
                             char **out_pruned_json,
                             char **out_metadata_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HMIL_EXPLAIN_H */
