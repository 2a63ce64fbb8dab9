#ifndef CHEBYQST_H
#define CHEBYQST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CqMode {
  CQ_MODE_EXACT = 0,
  CQ_MODE_IDEAL = 1,
  CQ_MODE_FAITHFUL = 2,
} CqMode;

typedef enum CqStatus {
  CQ_STATUS_OK = 0,
  CQ_STATUS_NULL_POINTER = 1,
  CQ_STATUS_INVALID_ARGUMENT = 2,
  CQ_STATUS_INVALID_CONFIG = 3,
  CQ_STATUS_DATA_ERROR = 4,
  CQ_STATUS_OUT_OF_RANGE = 5,
  CQ_STATUS_PANIC = 6,
} CqStatus;

/**
 * Opaque tomography configuration.
 */
typedef struct CqConfig CqConfig;

/**
 * Opaque tomography result.
 */
typedef struct CqResult CqResult;

/**
 * One estimated coefficient.
 */
typedef struct CqCoefficient {
  double re;
  double im;
  double stderr_re;
  double stderr_im;
  size_t total_degree;
  uint64_t shots;
  double prep_success;
} CqCoefficient;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *cq_version(void);

/**
 * Message for the last failed call on this thread. Valid until the next
 * failing call on the same thread.
 */
const char *cq_last_error(void);

/**
 * New configuration; `qubits` holds `n_dims` per-dimension qubit counts.
 * Defaults: order-0 stop rule, 500 shots, seed 0. Returns NULL on bad input.
 *
 * # Safety
 * `qubits` must point to `n_dims` readable values.
 */
struct CqConfig *cq_config_new(const size_t *qubits, size_t n_dims, enum CqMode mode);

/**
 * # Safety
 * `config` must be NULL or a handle from `cq_config_new` not yet freed.
 */
void cq_config_free(struct CqConfig *config);

/**
 * Stop at the first shell whose partial sum reaches `a_c`.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum CqStatus cq_config_set_threshold(struct CqConfig *config, double a_c);

/**
 * Estimate every shell up to total degree `order`.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum CqStatus cq_config_set_order(struct CqConfig *config, size_t order);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum CqStatus cq_config_set_max_order(struct CqConfig *config, size_t max_order);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum CqStatus cq_config_set_shots(struct CqConfig *config, uint64_t shots);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum CqStatus cq_config_set_seed(struct CqConfig *config, uint64_t seed);

/**
 * Runs tomography on `len` samples (`im` may be NULL for real data). The
 * samples are normalized first. On success `*out` receives a result handle.
 *
 * # Safety
 * `config` must be a live handle, `re` (and `im` if non-NULL) must point to
 * `len` readable values, and `out` must be writable.
 */
enum CqStatus cq_run(const struct CqConfig *config,
                     const double *re,
                     const double *im,
                     size_t len,
                     struct CqResult **out);

/**
 * # Safety
 * `result` must be NULL or a handle from `cq_run` not yet freed.
 */
void cq_result_free(struct CqResult *result);

/**
 * # Safety
 * `result` must be a live handle.
 */
size_t cq_result_stop_order(const struct CqResult *result);

/**
 * # Safety
 * `result` must be a live handle.
 */
bool cq_result_converged(const struct CqResult *result);

/**
 * Fidelity between the normalized input and the reconstruction; NaN for NULL.
 *
 * # Safety
 * `result` must be a live handle.
 */
double cq_result_fidelity(const struct CqResult *result);

/**
 * # Safety
 * `result` must be a live handle.
 */
size_t cq_result_num_coefficients(const struct CqResult *result);

/**
 * Total shots across all Hadamard tests (0 in exact mode).
 *
 * # Safety
 * `result` must be a live handle.
 */
uint64_t cq_result_total_shots(const struct CqResult *result);

/**
 * Coefficient `i` in estimation order.
 *
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum CqStatus cq_result_coefficient(const struct CqResult *result,
                                    size_t i,
                                    struct CqCoefficient *out);

/**
 * Writes the multi-index of coefficient `i` into `degrees` (capacity `cap`).
 * Returns the number of dimensions, or 0 on error.
 *
 * # Safety
 * `result` must be a live handle and `degrees` writable for `cap` values.
 */
size_t cq_result_index(const struct CqResult *result, size_t i, size_t *degrees, size_t cap);

/**
 * Copies up to `cap` partial sums into `out`; returns how many exist.
 *
 * # Safety
 * `result` must be a live handle; `out` writable for `cap` values or NULL.
 */
size_t cq_result_partial_sums(const struct CqResult *result, double *out, size_t cap);

/**
 * Reconstruction in normalized units; `re` and `im` must hold `len` values,
 * which must equal the grid size.
 *
 * # Safety
 * `result` must be a live handle; `re`, `im` writable for `len` values.
 */
enum CqStatus cq_result_reconstruction(const struct CqResult *result,
                                       double *re,
                                       double *im,
                                       size_t len);

/**
 * The full result as JSON; free with `cq_string_free`. NULL on error.
 *
 * # Safety
 * `result` must be a live handle.
 */
char *cq_result_to_json(const struct CqResult *result);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void cq_string_free(char *s);

/**
 * Samples the named builtin function at `2^n` points of its default grid,
 * normalized, into `out` (capacity `cap`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` writable for `cap` values.
 */
enum CqStatus cq_sample_builtin(const char *name, size_t n, double *out, size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHEBYQST_H */
