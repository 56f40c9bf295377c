#ifndef FBDE_H
#define FBDE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FbdeSchemeKind {
  FBDE_SCHEME_KIND_EXACT = 0,
  FBDE_SCHEME_KIND_RELATIVE = 1,
  FBDE_SCHEME_KIND_CONSTANT = 2,
} FbdeSchemeKind;

typedef enum FbdeStatus {
  FBDE_STATUS_OK = 0,
  FBDE_STATUS_NULL_POINTER = 1,
  FBDE_STATUS_INVALID_ARGUMENT = 2,
  FBDE_STATUS_IO = 3,
  FBDE_STATUS_FORMAT = 4,
  FBDE_STATUS_DEGENERATE = 5,
  FBDE_STATUS_PANIC = 6,
} FbdeStatus;

/**
 * Opaque handle to a fitted model.
 */
typedef struct FbdeModel FbdeModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *fbde_last_error(void);

/**
 * Loads a model JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FbdeStatus fbde_model_load(const char *path, struct FbdeModel **out);

/**
 * Parses a model from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FbdeStatus fbde_model_from_json(const char *json, struct FbdeModel **out);

/**
 * Serializes a model. Free the result with `fbde_string_free`.
 *
 * # Safety
 * `model` must come from this library; `out` must be a valid pointer.
 */
enum FbdeStatus fbde_model_to_json(const struct FbdeModel *model, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by `fbde_model_to_json`.
 */
void fbde_string_free(char *s);

/**
 * # Safety
 * `model` must be NULL or a handle from this library, freed at most once.
 */
void fbde_model_free(struct FbdeModel *model);

/**
 * # Safety
 * `model` must come from this library; `out` must be a valid pointer.
 */
enum FbdeStatus fbde_model_num_rounds(const struct FbdeModel *model, uintptr_t *out);

/**
 * Number of joint cells in the model's domain.
 *
 * # Safety
 * `model` must come from this library; `out` must be a valid pointer.
 */
enum FbdeStatus fbde_model_num_cells(const struct FbdeModel *model, uintptr_t *out);

/**
 * Number of sensitive groups.
 *
 * # Safety
 * `model` must come from this library; `out` must be a valid pointer.
 */
enum FbdeStatus fbde_model_num_groups(const struct FbdeModel *model, uintptr_t *out);

/**
 * Probability of one joint cell.
 *
 * # Safety
 * `model` must come from this library; `out` must be a valid pointer.
 */
enum FbdeStatus fbde_model_density(const struct FbdeModel *model, uintptr_t cell, double *out);

/**
 * Representation rate of the model, from its stored normalizers.
 *
 * # Safety
 * `model` must come from this library; `out` must be a valid pointer.
 */
enum FbdeStatus fbde_model_representation_rate(const struct FbdeModel *model, double *out);

/**
 * Writes the sensitive marginal into `buf`, which must hold exactly
 * `fbde_model_num_groups` values.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum FbdeStatus fbde_model_sensitive_marginal(const struct FbdeModel *model,
                                              double *buf,
                                              uintptr_t len);

/**
 * Draws `n` joint cells from the model, deterministically in `seed`.
 *
 * # Safety
 * `cells` must point to `n` writable values.
 */
enum FbdeStatus fbde_model_sample(const struct FbdeModel *model,
                                  uintptr_t n,
                                  uint64_t seed,
                                  uintptr_t *cells);

/**
 * Fits a model on categorical data given as joint cell indices.
 *
 * `cards` lists each attribute's cardinality; attribute `sensitive` is the
 * sensitive one. `value` is the coefficient of the constant scheme and is
 * ignored otherwise. The bound on classifier outputs is ln 2 and Q0 uses
 * add-one smoothing.
 *
 * # Safety
 * `cards` must point to `n_attrs` values, `cells` to `n_rows` values, and
 * `out` must be a valid pointer.
 */
enum FbdeStatus fbde_fit_cells(const uintptr_t *cards,
                               uintptr_t n_attrs,
                               uintptr_t sensitive,
                               const uintptr_t *cells,
                               uintptr_t n_rows,
                               enum FbdeSchemeKind kind,
                               double tau,
                               double value,
                               uintptr_t rounds,
                               uint64_t seed,
                               struct FbdeModel **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FBDE_H */
