#ifndef CONVEXFLOWS_H
#define CONVEXFLOWS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum CfError {
  CF_OK = 0,
  /**
   * A required pointer argument was null.
   */
  CF_ERR_NULL = 1,
  /**
   * The problem, generator arguments or solver options were rejected.
   */
  CF_ERR_INVALID = 2,
  CF_ERR_IO = 3,
  /**
   * A Rust panic was caught at the boundary.
   */
  CF_ERR_PANIC = 4,
  /**
   * The caller's buffer was too short; the needed length was written.
   */
  CF_ERR_BUFFER = 5,
  CF_ERR_UTF8 = 6,
} CfError;

typedef enum CfMode {
  CF_MODE_AUTO = 0,
  CF_MODE_REDUCED = 1,
  CF_MODE_EXTENDED = 2,
} CfMode;

typedef enum CfStatus {
  CF_STATUS_OPTIMAL = 0,
  CF_STATUS_MAX_ITER = 1,
  CF_STATUS_LINE_SEARCH_FAILURE = 2,
} CfStatus;

/**
 * Opaque problem handle.
 */
typedef struct CfProblem CfProblem;

/**
 * Opaque solve result handle.
 */
typedef struct CfResult CfResult;

typedef struct CfSolverOptions {
  double tol_gap;
  double tol_grad;
  size_t max_iter;
  size_t threads;
  enum CfMode mode;
} CfSolverOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next `cf_*` call on the same thread.
 */
const char *cf_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from a `cf_*` call that returns an owned string and must not
 * be freed twice.
 */
void cf_string_free(char *s);

/**
 * Parses a problem from a NUL-terminated JSON document.
 *
 * # Safety
 * `json` must be a valid C string and `out` a writable pointer.
 */
enum CfError cf_problem_from_json(const char *json, struct CfProblem **out);

/**
 * # Safety
 * `path` must be a valid C string and `out` a writable pointer.
 */
enum CfError cf_problem_from_file(const char *path, struct CfProblem **out);

/**
 * Serializes a problem to JSON. Free the string with `cf_string_free`.
 *
 * # Safety
 * `problem` must be a live handle and `out` a writable pointer.
 */
enum CfError cf_problem_to_json(const struct CfProblem *problem, char **out);

/**
 * # Safety
 * `out` must be a writable pointer.
 */
enum CfError cf_generate_opf(size_t nodes, size_t periods, uint64_t seed, struct CfProblem **out);

/**
 * Three-node scenario, with or without the battery.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum CfError cf_generate_preset(size_t periods, bool battery, struct CfProblem **out);

/**
 * # Safety
 * `out` must be a writable pointer.
 */
enum CfError cf_generate_cfmm(size_t markets,
                              uint64_t seed,
                              bool penalties,
                              struct CfProblem **out);

/**
 * # Safety
 * `out` must be a writable pointer.
 */
enum CfError cf_generate_fisher(size_t buyers, size_t goods, uint64_t seed, struct CfProblem **out);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t cf_problem_num_nodes(const struct CfProblem *problem);

/**
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t cf_problem_num_edges(const struct CfProblem *problem);

/**
 * # Safety
 * `problem` must be null or a handle not yet freed.
 */
void cf_problem_free(struct CfProblem *problem);

struct CfSolverOptions cf_solver_options_default(void);

/**
 * Solves `problem`. A null `options` uses the defaults. Reaching the
 * iteration limit still returns `CF_OK`; inspect `cf_result_status`.
 *
 * # Safety
 * `problem` must be a live handle, `options` null or readable, and `out` a
 * writable pointer.
 */
enum CfError cf_solve(const struct CfProblem *problem,
                      const struct CfSolverOptions *options,
                      struct CfResult **out);

/**
 * # Safety
 * `result` must be a live handle.
 */
enum CfStatus cf_result_status(const struct CfResult *result);

/**
 * # Safety
 * `result` must be a live handle.
 */
size_t cf_result_iterations(const struct CfResult *result);

/**
 * # Safety
 * `result` must be a live handle.
 */
double cf_result_dual_value(const struct CfResult *result);

/**
 * Certified primal value; negative infinity when no recovered flow was feasible.
 *
 * # Safety
 * `result` must be a live handle.
 */
double cf_result_primal_value(const struct CfResult *result);

/**
 * # Safety
 * `result` must be a live handle.
 */
double cf_result_relative_gap(const struct CfResult *result);

/**
 * Copies the node prices into `buf`. `needed`, when non-null, receives the
 * node count, so a first call with `len = 0` sizes the buffer.
 *
 * # Safety
 * `result` must be a live handle, `buf` must hold `len` doubles, and `needed`
 * must be null or writable.
 */
enum CfError cf_result_nu(const struct CfResult *result, double *buf, size_t len, size_t *needed);

/**
 * Copies the recovered net flow into `buf`; same calling convention as `cf_result_nu`.
 *
 * # Safety
 * See `cf_result_nu`.
 */
enum CfError cf_result_y_hat(const struct CfResult *result,
                             double *buf,
                             size_t len,
                             size_t *needed);

/**
 * Result file contents as JSON. Free the string with `cf_string_free`.
 *
 * # Safety
 * `result` must be a live handle and `out` a writable pointer.
 */
enum CfError cf_result_to_json(const struct CfResult *result, char **out);

/**
 * # Safety
 * `result` must be null or a handle not yet freed.
 */
void cf_result_free(struct CfResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONVEXFLOWS_H */
