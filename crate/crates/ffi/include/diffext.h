#ifndef DIFFEXT_H
#define DIFFEXT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call. Zero is success.
 */
typedef enum {
  DIFFEXT_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  DIFFEXT_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  DIFFEXT_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed scenario or map description.
   */
  DIFFEXT_STATUS_SCHEMA = 3,
  /**
   * The construction pipeline failed.
   */
  DIFFEXT_STATUS_PIPELINE = 4,
  /**
   * Buffer length does not match the map's dimension.
   */
  DIFFEXT_STATUS_DIMENSION = 5,
  /**
   * Evaluation, differentiation or inversion failed at the given point.
   */
  DIFFEXT_STATUS_EVALUATION = 6,
  /**
   * A panic was caught at the boundary.
   */
  DIFFEXT_STATUS_PANIC = 7,
} DiffextStatus;

/**
 * A diffeomorphism of ℝⁿ.
 */
typedef struct DiffextMap DiffextMap;

/**
 * A verification report with its serialized form.
 */
typedef struct DiffextReport DiffextReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *diffext_last_error(void);

/**
 * Library version as a static string.
 */
const char *diffext_version(void);

/**
 * Load a map from its JSON tree (as found under `parameters.map` in a report).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
DiffextStatus diffext_map_from_json(const char *json, DiffextMap **out);

/**
 * Serialize a map to JSON. Release the string with [`diffext_string_free`].
 * Returns null on failure.
 *
 * # Safety
 * `map` must be a handle from this library.
 */
char *diffext_map_to_json(const DiffextMap *map);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void diffext_string_free(char *s);

/**
 * Run a scenario's construction and return the resulting map, without
 * verification.
 *
 * # Safety
 * `scenario_json` must be a NUL-terminated string and `out` a writable pointer.
 */
DiffextStatus diffext_scenario_build(const char *scenario_json, DiffextMap **out);

/**
 * Run a scenario and its verification suite. A pipeline failure still
 * produces a (partial) report; the status is then `Pipeline`.
 *
 * # Safety
 * `scenario_json` must be a NUL-terminated string and `out` a writable pointer.
 */
DiffextStatus diffext_scenario_run(const char *scenario_json, DiffextReport **out);

/**
 * 1 when every check passed, 0 otherwise (including a null handle).
 *
 * # Safety
 * `report` must be null or a handle from this library.
 */
int32_t diffext_report_passed(const DiffextReport *report);

/**
 * Exit status the command-line tool would use for this report.
 *
 * # Safety
 * `report` must be null or a handle from this library.
 */
uint8_t diffext_report_exit_code(const DiffextReport *report);

/**
 * Number of checks in the report.
 *
 * # Safety
 * `report` must be null or a handle from this library.
 */
uintptr_t diffext_report_check_count(const DiffextReport *report);

/**
 * The report as JSON, owned by the report handle.
 *
 * # Safety
 * `report` must be null or a handle from this library.
 */
const char *diffext_report_json(const DiffextReport *report);

/**
 * # Safety
 * `report` must be null or a handle from this library, not used afterwards.
 */
void diffext_report_free(DiffextReport *report);

/**
 * Dimension of the map, or 0 for a null handle.
 *
 * # Safety
 * `map` must be null or a handle from this library.
 */
uintptr_t diffext_map_dim(const DiffextMap *map);

/**
 * `y = F(x)` for `x`, `y` of length `n`.
 *
 * # Safety
 * `map` must be a handle from this library; `x` and `y` must hold `n` doubles.
 */
DiffextStatus diffext_map_eval(const DiffextMap *map, const double *x, uintptr_t n, double *y);

/**
 * `y = F(x)` and the Jacobian `DF(x)` in row-major order (`n·n` doubles).
 * `y` may be null.
 *
 * # Safety
 * `map` must be a handle from this library; `x` must hold `n` doubles, `y`
 * (if not null) `n` doubles and `jac` `n·n` doubles.
 */
DiffextStatus diffext_map_jacobian(const DiffextMap *map,
                                   const double *x,
                                   uintptr_t n,
                                   double *y,
                                   double *jac);

/**
 * `x = F⁻¹(y)` for `x`, `y` of length `n`.
 *
 * # Safety
 * `map` must be a handle from this library; `y` and `x` must hold `n` doubles.
 */
DiffextStatus diffext_map_inverse(const DiffextMap *map, const double *y, uintptr_t n, double *x);

/**
 * # Safety
 * `map` must be null or a handle from this library, not used afterwards.
 */
void diffext_map_free(DiffextMap *map);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIFFEXT_H */
