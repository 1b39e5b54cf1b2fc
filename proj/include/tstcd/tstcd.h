/* SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the tstcd cross-modal distillation forecaster.
 *
 * All functions return TSTCD_OK on success; on failure they return a status
 * code and record a human-readable message retrievable (on the same thread)
 * via tstcd_last_error(). Handles are opaque and must be released with their
 * matching free function. Strings returned through char** out-parameters are
 * owned by the caller and must be released with tstcd_string_free().
 */
#ifndef TSTCD_H
#define TSTCD_H

#include <stddef.h>

#if defined(_WIN32)
#define TSTCD_API __declspec(dllexport)
#else
#define TSTCD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tstcd_status {
    TSTCD_OK = 0,
    TSTCD_ERR_INVALID_ARGUMENT = 1, /* bad pointer, shape or usage */
    TSTCD_ERR_CONFIG = 2,           /* invalid configuration value */
    TSTCD_ERR_PARSE = 3,            /* malformed file content */
    TSTCD_ERR_IO = 4,               /* filesystem failure */
    TSTCD_ERR_NUMERIC = 5,          /* numeric-domain violation */
    TSTCD_ERR_INTERNAL = 6
} tstcd_status;

typedef struct tstcd_config tstcd_config; /* run configuration */
typedef struct tstcd_model tstcd_model;   /* loaded checkpoint */

TSTCD_API const char* tstcd_version(void);

/* Message from the last failing call on this thread; empty string if none. */
TSTCD_API const char* tstcd_last_error(void);

TSTCD_API void tstcd_string_free(char* s);

/* ---- configuration ---- */

TSTCD_API tstcd_status tstcd_config_create(tstcd_config** out);
TSTCD_API tstcd_status tstcd_config_load(const char* path, tstcd_config** out);
TSTCD_API tstcd_status tstcd_config_save(const tstcd_config* cfg, const char* path);
TSTCD_API tstcd_status tstcd_config_set(tstcd_config* cfg, const char* key, const char* value);
TSTCD_API tstcd_status tstcd_config_get(const tstcd_config* cfg, const char* key, char* buf,
                                        size_t buf_size);
TSTCD_API void tstcd_config_free(tstcd_config* cfg);

/* ---- commands ---- */

/* Writes the configured synthetic series as CSV. */
TSTCD_API tstcd_status tstcd_synth(const tstcd_config* cfg, const char* out_csv);

/* Trains per the configuration; writes checkpoint.tstcd, trace.jsonl and
 * config.txt into out_dir. */
TSTCD_API tstcd_status tstcd_train(const tstcd_config* cfg, const char* out_dir);

/* Evaluates a checkpoint on the configured data; *out_json gets a metrics
 * object (mse, mae, smape, mase, owa when available, per-horizon arrays). */
TSTCD_API tstcd_status tstcd_eval(const char* checkpoint_path, const tstcd_config* cfg,
                                  char** out_json);

/* Forecasts `horizon` rows (0 = trained horizon) from the last lookback
 * window of input_csv into out_csv. */
TSTCD_API tstcd_status tstcd_forecast(const char* checkpoint_path, const char* input_csv,
                                      long long horizon, const char* out_csv);

/* Runs the four-row component sweep (each component alone, then the full
 * model); writes per-row run directories and ablation.csv under out_dir and
 * returns the rows as JSON. out_json may be NULL. */
TSTCD_API tstcd_status tstcd_ablate(const tstcd_config* cfg, const char* out_dir, char** out_json);

/* Checks the reverse-mode gradient of the total training loss against
 * central finite differences on up to max_coords sampled coordinates. */
TSTCD_API tstcd_status tstcd_grad_check(const tstcd_config* cfg, int max_coords, double epsilon,
                                        double* out_max_rel_err, int* out_coords_checked);

/* ---- model handles ---- */

TSTCD_API tstcd_status tstcd_model_load(const char* checkpoint_path, tstcd_model** out);
TSTCD_API void tstcd_model_free(tstcd_model* model);

/* Model dimensions as JSON (width, layers, heads, lookback, horizon,
 * variates). */
TSTCD_API tstcd_status tstcd_model_info(const tstcd_model* model, char** out_json);

/* In-memory forecast: input is a row-major lookback x variates window in the
 * data's original scale; out must hold horizon * variates doubles. */
TSTCD_API tstcd_status tstcd_model_forecast(const tstcd_model* model, const double* input,
                                            size_t input_len, double* out, size_t out_len);

#ifdef __cplusplus
}
#endif

#endif /* TSTCD_H */
