#ifndef DQCSIM_H
#define DQCSIM_H

/* Generated by cbindgen from dqcsim-ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum DqcStatus {
  DQC_STATUS_OK = 0,
  DQC_STATUS_NULL_POINTER = 1,
  DQC_STATUS_INVALID_UTF8 = 2,
  DQC_STATUS_CONFIG = 3,
  DQC_STATUS_PRECONDITION = 4,
  DQC_STATUS_SIZE_CAP = 5,
  DQC_STATUS_SIMULATION = 6,
  DQC_STATUS_PANIC = 7,
} DqcStatus;

/**
 * How `dqcsim_run` explores client and server randomness.
 */
typedef enum DqcMode {
  /**
   * Sample mode when a seed is given, enumeration otherwise.
   */
  DQC_MODE_AUTO = 0,
  DQC_MODE_SAMPLE = 1,
  DQC_MODE_ENUMERATE = 2,
} DqcMode;

/**
 * Parsed run configuration.
 */
typedef struct DqcConfig DqcConfig;

/**
 * Result of one protocol run.
 */
typedef struct DqcRunResult DqcRunResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *dqcsim_last_error(void);

/**
 * Parse a JSON run configuration.
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be writable.
 */
enum DqcStatus dqcsim_config_from_json(const char *json, struct DqcConfig **out);

/**
 * # Safety
 * `cfg` must come from `dqcsim_config_from_json` or be NULL.
 */
void dqcsim_config_free(struct DqcConfig *cfg);

/**
 * Run the configured protocol. `has_seed = false` ignores `seed`.
 *
 * # Safety
 * `cfg` must be a live config handle; `out` must be writable.
 */
enum DqcStatus dqcsim_run(const struct DqcConfig *cfg,
                          enum DqcMode mode,
                          bool has_seed,
                          uint64_t seed,
                          struct DqcRunResult **out);

/**
 * # Safety
 * `r` must come from `dqcsim_run` or be NULL.
 */
void dqcsim_result_free(struct DqcRunResult *r);

/**
 * # Safety
 * `r` must be a live result handle; `accepted` and `p_abort` writable.
 */
enum DqcStatus dqcsim_result_outcome(const struct DqcRunResult *r, bool *accepted, double *p_abort);

/**
 * Result and transcript as JSON; release with `dqcsim_string_free`.
 *
 * # Safety
 * `r` must be a live result handle; `out` must be writable.
 */
enum DqcStatus dqcsim_result_json(const struct DqcRunResult *r, char **out);

/**
 * # Safety
 * `s` must come from this library or be NULL.
 */
void dqcsim_string_free(char *s);

/**
 * Class E sweep on the configured trap instance.
 *
 * # Safety
 * `cfg` must be a live config handle; the three outputs writable.
 */
enum DqcStatus dqcsim_bound(const struct DqcConfig *cfg,
                            uint32_t weight,
                            double *max_p_fail,
                            double *max_bound,
                            size_t *attacks);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DQCSIM_H */
