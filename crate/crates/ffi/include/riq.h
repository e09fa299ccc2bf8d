#ifndef RIQ_H
#define RIQ_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>

/**
 * Result codes. `RIQ_STATUS_OK` is zero; everything else is a failure.
 */
typedef enum RiqStatus {
  RIQ_STATUS_OK = 0,
  RIQ_STATUS_NULL_ARGUMENT = 1,
  RIQ_STATUS_INVALID_UTF8 = 2,
  RIQ_STATUS_FILE_NOT_FOUND = 3,
  RIQ_STATUS_IO = 4,
  RIQ_STATUS_IMAGE = 5,
  RIQ_STATUS_FORMAT = 6,
  RIQ_STATUS_INVALID_PARAMETER = 7,
  RIQ_STATUS_DIMENSION_MISMATCH = 8,
  RIQ_STATUS_UNKNOWN_KEYWORD = 9,
  RIQ_STATUS_INTERNAL = 10,
  RIQ_STATUS_PANIC = 11,
} RiqStatus;

/**
 * A loaded keyword index.
 */
typedef struct RiqIndex RiqIndex;

/**
 * A loaded classifier.
 */
typedef struct RiqModel RiqModel;

/**
 * An owned list of strings returned by classification and queries.
 */
typedef struct RiqStringList RiqStringList;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *riq_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *riq_version(void);

/**
 * Multi-level activation at `x` for steepness `beta`, window width `c` and
 * `n` levels. Returns NaN for invalid parameters.
 */
double riq_mlaf(double x, double beta, double c, size_t n);

/**
 * Loads a model file into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RiqStatus riq_model_load(const char *path, struct RiqModel **out);

/**
 * # Safety
 * `model` must come from `riq_model_load` and not be used afterwards. Null is ignored.
 */
void riq_model_free(struct RiqModel *model);

/**
 * Expected raw feature length, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t riq_model_input_dim(const struct RiqModel *model);

/**
 * Number of categories, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t riq_model_category_count(const struct RiqModel *model);

/**
 * Name of category `level` (1-based), owned by the model, or null when out
 * of range.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
const char *riq_model_category_name(const struct RiqModel *model, size_t level);

/**
 * Classifies one raw (unnormalized) feature vector. Writes the 1-based
 * category to `*level` and the network output to `*output`; either may be null.
 *
 * # Safety
 * `features` must point to `len` doubles; `level` and `output` must be null
 * or writable.
 */
enum RiqStatus riq_model_predict(const struct RiqModel *model,
                                 const double *features,
                                 size_t len,
                                 size_t *level,
                                 double *output);

/**
 * Segments an image with default parameters and returns one category name
 * per significant region, in region order.
 *
 * # Safety
 * `model` must be a live handle, `path` NUL-terminated, `out` writable.
 */
enum RiqStatus riq_model_classify_image(const struct RiqModel *model,
                                        const char *path,
                                        struct RiqStringList **out);

/**
 * Loads an index file into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RiqStatus riq_index_load(const char *path, struct RiqIndex **out);

/**
 * # Safety
 * `index` must come from `riq_index_load` and not be used afterwards. Null is ignored.
 */
void riq_index_free(struct RiqIndex *index);

/**
 * Number of indexed images, or 0 for a null handle.
 *
 * # Safety
 * `index` must be null or a live handle.
 */
size_t riq_index_len(const struct RiqIndex *index);

/**
 * Ids of images containing all `keywords` (or any of them when
 * `match_any` is true), sorted. Keywords are category names, any case.
 *
 * # Safety
 * `keywords` must point to `count` NUL-terminated strings; `out` writable.
 */
enum RiqStatus riq_index_query(const struct RiqIndex *index,
                               const char *const *keywords,
                               size_t count,
                               bool match_any,
                               struct RiqStringList **out);

/**
 * # Safety
 * `list` must be null or a live handle.
 */
size_t riq_string_list_len(const struct RiqStringList *list);

/**
 * Item `i`, owned by the list, or null when out of range.
 *
 * # Safety
 * `list` must be null or a live handle.
 */
const char *riq_string_list_get(const struct RiqStringList *list, size_t i);

/**
 * # Safety
 * `list` must come from this library and not be used afterwards. Null is ignored.
 */
void riq_string_list_free(struct RiqStringList *list);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIQ_H */
