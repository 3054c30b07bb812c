#ifndef QUDIT_READOUT_H
#define QUDIT_READOUT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes. Zero is success.
 */
typedef enum QrStatus {
  QR_STATUS_OK = 0,
  QR_STATUS_NULL_POINTER = 1,
  QR_STATUS_INVALID_ARGUMENT = 2,
  QR_STATUS_CONFIG = 3,
  QR_STATUS_NUMERICAL = 4,
  QR_STATUS_BUDGET = 5,
  QR_STATUS_IO = 6,
  QR_STATUS_UNSUPPORTED = 7,
  QR_STATUS_PANIC = 8,
} QrStatus;

/**
 * Parsed and validated run configuration.
 */
typedef struct QrConfig QrConfig;

/**
 * IQ points of a simulated ensemble.
 */
typedef struct QrEnsemble QrEnsemble;

/**
 * Derived readout model with its steady-state rate table.
 */
typedef struct QrModel QrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of the calling thread into `buf` (NUL-terminated, truncated
 * to `len`). Returns the full message length without the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t qr_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qr_version(void);

/**
 * Parses a JSON run configuration.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QrStatus qr_config_parse(const char *json, struct QrConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle from [`qr_config_parse`] not yet freed.
 */
void qr_config_free(struct QrConfig *cfg);

/**
 * Builds the readout model of a configuration.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` a valid pointer.
 */
enum QrStatus qr_model_new(const struct QrConfig *cfg, struct QrModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`qr_model_new`] not yet freed.
 */
void qr_model_free(struct QrModel *model);

/**
 * Number of qudit levels, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live model handle.
 */
size_t qr_model_levels(const struct QrModel *model);

/**
 * Steady-state resonator amplitudes; `re` and `im` must hold `len >= levels` values.
 *
 * # Safety
 * `re` and `im` must point to `len` writable doubles.
 */
enum QrStatus qr_model_steady_state(const struct QrModel *model,
                                    double *re,
                                    double *im,
                                    size_t len);

/**
 * Steady-state measurement rate `Gamma_m` and dephasing rate `Gamma_d` of levels `j`, `k` (1/us).
 *
 * # Safety
 * `gamma_m` and `gamma_d` must be valid pointers.
 */
enum QrStatus qr_model_pair_rates(const struct QrModel *model,
                                  size_t j,
                                  size_t k,
                                  double *gamma_m,
                                  double *gamma_d);

/**
 * Rates report as a JSON string; release it with [`qr_string_free`].
 *
 * # Safety
 * `model` must be a live model handle and `out` a valid pointer.
 */
enum QrStatus qr_model_rates_json(const struct QrModel *model, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void qr_string_free(char *s);

/**
 * Runs a CLI command (`"rates"`, `"solve-me"`, `"solve-effective-me"`, `"simulate"`, `"sweep"`)
 * writing its files and manifest into `out_dir`. `seed` replaces the configured master seed
 * when `use_seed` is true; `trajectories` replaces the configured count when nonzero.
 *
 * # Safety
 * Pointers must be live handles or NUL-terminated strings.
 */
enum QrStatus qr_run(const struct QrConfig *cfg,
                     const char *command,
                     const char *out_dir,
                     bool use_seed,
                     uint64_t seed,
                     size_t trajectories);

/**
 * Simulates the ensemble of a `simulate` config and keeps its IQ points.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` a valid pointer.
 */
enum QrStatus qr_ensemble_run(const struct QrConfig *cfg,
                              bool use_seed,
                              uint64_t seed,
                              size_t trajectories,
                              struct QrEnsemble **out);

/**
 * # Safety
 * `ens` must be null or a handle from [`qr_ensemble_run`] not yet freed.
 */
void qr_ensemble_free(struct QrEnsemble *ens);

/**
 * Number of completed trajectories (one IQ point each), or 0 for a null handle.
 *
 * # Safety
 * `ens` must be null or a live ensemble handle.
 */
size_t qr_ensemble_len(const struct QrEnsemble *ens);

/**
 * Number of trajectories dropped by numerical aborts.
 *
 * # Safety
 * `ens` must be null or a live ensemble handle.
 */
size_t qr_ensemble_aborted(const struct QrEnsemble *ens);

/**
 * IQ point `index`: trajectory id and time-averaged record `(I, Q)`.
 *
 * # Safety
 * Output pointers must be valid.
 */
enum QrStatus qr_ensemble_point(const struct QrEnsemble *ens,
                                size_t index,
                                uint64_t *trajectory_id,
                                double *i,
                                double *q);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUDIT_READOUT_H */
