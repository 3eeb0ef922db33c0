#ifndef SUMTRACE_H
#define SUMTRACE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum StStatus {
  ST_STATUS_OK = 0,
  ST_STATUS_NULL_POINTER = 1,
  ST_STATUS_INVALID_UTF8 = 2,
  ST_STATUS_INVALID_ARGUMENT = 3,
  ST_STATUS_IO = 4,
  ST_STATUS_NOT_A_CAMPAIGN = 5,
  ST_STATUS_LOCKED = 6,
  ST_STATUS_PHASE = 7,
  ST_STATUS_INTEGRITY = 8,
  ST_STATUS_SYNTAX = 9,
  ST_STATUS_STATISTICS = 10,
  ST_STATUS_PANIC = 11,
} StStatus;

/**
 * Opaque campaign handle.
 */
typedef struct StCampaign StCampaign;

/**
 * Opaque program handle.
 */
typedef struct StProgram StProgram;

/**
 * Mirrors the core result; `degrees_of_freedom` is -1 and `effect_size`
 * is NaN where undefined.
 */
typedef struct StStatResult {
  double statistic;
  int64_t degrees_of_freedom;
  double p_value;
  double effect_size;
  uint64_t n;
} StStatResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, statically allocated. Do not free.
 */
const char *st_version(void);

/**
 * Message for the last failed call on this thread, or "" if none. Valid
 * until the next failing call on the same thread.
 */
const char *st_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void st_string_free(char *s);

/**
 * Opens a campaign directory. A writable open takes the campaign lock and
 * fails with `ST_STATUS_LOCKED` while another writer holds it.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum StStatus st_campaign_open(const char *path, bool read_only, struct StCampaign **out);

/**
 * Releases the handle and its lock.
 *
 * # Safety
 * `c` must be null or a handle from [`st_campaign_open`], freed once.
 */
void st_campaign_free(struct StCampaign *c);

/**
 * Current phase name, e.g. "Mutated".
 *
 * # Safety
 * `c` must be a live handle; `out` must be writable.
 */
enum StStatus st_campaign_phase(const struct StCampaign *c, char **out);

/**
 * Runs the integrity check. `*clean` is set either way; `out_json`, when
 * non-null, receives the findings.
 *
 * # Safety
 * `c` must be a live handle; `clean` must be writable.
 */
enum StStatus st_campaign_verify(const struct StCampaign *c, bool *clean, char **out_json);

/**
 * Review progress as JSON (the `/progress` endpoint body).
 *
 * # Safety
 * `c` must be a live handle; `out_json` must be writable.
 */
enum StStatus st_campaign_progress_json(const struct StCampaign *c, char **out_json);

/**
 * Parses and classifies a Python program.
 *
 * # Safety
 * `id` and `source` must be NUL-terminated; `out` must be writable.
 */
enum StStatus st_program_new(const char *id, const char *source, struct StProgram **out);

/**
 * # Safety
 * `p` must be null or a handle from [`st_program_new`], freed once.
 */
void st_program_free(struct StProgram *p);

/**
 * Effective lines of code.
 *
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
enum StStatus st_program_loc(const struct StProgram *p, size_t *out);

/**
 * Complexity category name: "SF", "SC", "MC" or "MT".
 *
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
enum StStatus st_program_complexity(const struct StProgram *p, char **out);

/**
 * Mutation plan as JSON. `quota` uses the CLI syntax ("3" or
 * "stmt_b=2,val=1"); null means one per cell.
 *
 * # Safety
 * `p` must be a live handle; `quota` null or NUL-terminated; `out_json`
 * writable.
 */
enum StStatus st_program_plan_json(const struct StProgram *p,
                                   const char *quota,
                                   uint64_t seed,
                                   char **out_json);

/**
 * Pearson χ² on a row-major `rows × cols` table of counts.
 *
 * # Safety
 * `counts` must point to `rows * cols` values; `out` must be writable.
 */
enum StStatus st_chi_square(const uint64_t *counts,
                            size_t rows,
                            size_t cols,
                            struct StStatResult *out);

/**
 * Cohen's κ for a 2×2 agreement table. `*agreement` (optional) receives
 * the observed agreement fraction.
 *
 * # Safety
 * `kappa` must be writable; `agreement` null or writable.
 */
enum StStatus st_cohens_kappa(uint64_t both_positive,
                              uint64_t a_positive_b_negative,
                              uint64_t a_negative_b_positive,
                              uint64_t both_negative,
                              double *kappa,
                              double *agreement);

/**
 * Two-sided Mann–Whitney U.
 *
 * # Safety
 * `a` and `b` must point to `n_a` and `n_b` values; `out` must be writable.
 */
enum StStatus st_mann_whitney_u(const double *a,
                                size_t n_a,
                                const double *b,
                                size_t n_b,
                                struct StStatResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUMTRACE_H */
