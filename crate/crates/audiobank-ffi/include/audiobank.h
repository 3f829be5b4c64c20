#ifndef AUDIOBANK_H
#define AUDIOBANK_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum AbStatus {
  /**
   * Success.
   */
  AB_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  AB_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  AB_STATUS_INVALID_UTF8 = 2,
  /**
   * Invalid argument (bad sizes, bad config values).
   */
  AB_STATUS_INVALID_ARGUMENT = 3,
  /**
   * File system or decode failure.
   */
  AB_STATUS_IO = 4,
  /**
   * The operation failed; see `ab_last_error_message`.
   */
  AB_STATUS_FAILED = 5,
} AbStatus;

/**
 * Opaque detector bank handle.
 */
typedef struct AbBank AbBank;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `buf_len`). Returns the full message length in
 * bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `buf_len` writable bytes.
 */
uintptr_t ab_last_error_message(char *buf, uintptr_t buf_len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ab_version(void);

/**
 * Generate the bundled synthetic corpus (WAVs plus manifest.json) under
 * `out_dir`, `per_class` clips for each of the 12 classes.
 *
 * # Safety
 * `out_dir` must be a NUL-terminated string.
 */
enum AbStatus ab_synth_corpus(const char *out_dir, uint64_t seed, uintptr_t per_class);

/**
 * Build a bank from every clip in a corpus manifest, with `nd` detectors
 * per class, and return an owned handle in `out_bank`.
 *
 * # Safety
 * `manifest_path` must be a NUL-terminated string; `out_bank` must be a
 * valid pointer to a pointer slot.
 */
enum AbStatus ab_bank_build(const char *manifest_path,
                            uintptr_t nd,
                            uint64_t seed,
                            struct AbBank **out_bank);

/**
 * Load a bank directory saved by `ab_bank_save` or the CLI.
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `out_bank` must be a valid
 * pointer to a pointer slot.
 */
enum AbStatus ab_bank_load(const char *dir, struct AbBank **out_bank);

/**
 * Save a bank as a directory (manifest plus binary detector fields).
 *
 * # Safety
 * `bank` must be a live handle from `ab_bank_build` or `ab_bank_load`.
 */
enum AbStatus ab_bank_save(const struct AbBank *bank, const char *dir);

/**
 * Number of detectors in the bank; 0 for a null handle.
 *
 * # Safety
 * `bank` must be null or a live handle.
 */
uintptr_t ab_bank_detector_count(const struct AbBank *bank);

/**
 * Length of the feature vector this bank produces (detectors x 21); 0 for
 * a null handle.
 *
 * # Safety
 * `bank` must be null or a live handle.
 */
uintptr_t ab_bank_feature_len(const struct AbBank *bank);

/**
 * Featurize one WAV file against the bank. `out` must hold exactly
 * `ab_bank_feature_len(bank)` doubles.
 *
 * # Safety
 * `bank` must be a live handle; `out` must point to `out_len` writable
 * doubles.
 */
enum AbStatus ab_featurize_wav(const struct AbBank *bank,
                               const char *wav_path,
                               double *out,
                               uintptr_t out_len);

/**
 * Release a bank handle. Null is a no-op.
 *
 * # Safety
 * `bank` must be null or an owned handle not freed before.
 */
void ab_bank_free(struct AbBank *bank);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AUDIOBANK_H */
