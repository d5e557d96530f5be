/* gridrl — token-grid text-to-image RL trainer, C interface.
 *
 * All functions return GRL_OK (0) on success; on failure they return a
 * status code and leave a human-readable message in grl_last_error()
 * (thread-local, valid until the next failing call on the same thread).
 * Handles are opaque and single-owner; destroy functions accept NULL.
 */
#ifndef GRIDRL_H
#define GRIDRL_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define GRIDRL_API __declspec(dllexport)
#else
#define GRIDRL_API __attribute__((visibility("default")))
#endif

typedef enum grl_status {
    GRL_OK = 0,
    GRL_ERR = 1,
    GRL_ERR_CONFIG = 2,     /* bad config file, key or value           */
    GRL_ERR_NUMERIC = 3,    /* non-finite loss or gradient, aborted    */
    GRL_ERR_RESUME = 4,     /* checkpoint/manifest digest mismatch     */
    GRL_ERR_IO = 5,         /* unreadable or unwritable file           */
    GRL_ERR_VALIDATION = 6, /* malformed record or argument            */
    GRL_ERR_REMOTE = 7,     /* reward endpoint failure                 */
    GRL_ERR_GENERATION = 8  /* unsatisfiable scene or exhausted retry  */
} grl_status;

typedef struct grl_config grl_config;

/* ---- configuration ---- */
GRIDRL_API grl_status grl_config_create(grl_config** out);
GRIDRL_API grl_status grl_config_load(const char* path, grl_config** out);
GRIDRL_API void grl_config_destroy(grl_config* cfg);
GRIDRL_API grl_status grl_config_set(grl_config* cfg, const char* dotted_key, const char* value);
GRIDRL_API grl_status grl_config_get(const grl_config* cfg, const char* dotted_key, char* buf,
                                     size_t buf_len);
GRIDRL_API grl_status grl_config_apply_env(grl_config* cfg, const char* prefix);
GRIDRL_API grl_status grl_config_digest(const grl_config* cfg, char* buf, size_t buf_len);
GRIDRL_API grl_status grl_config_save(const grl_config* cfg, const char* path);

/* ---- pipeline stages ---- */
/* Paired-record dataset; suite_out may be NULL to skip suite generation. */
GRIDRL_API grl_status grl_gen_data(const grl_config* cfg, const char* records_out,
                                   const char* suite_out);
GRIDRL_API grl_status grl_sft(const grl_config* cfg, const char* data_path, const char* ckpt_out,
                              const char* metrics_out);
/* init_ckpt/resume_ckpt may be NULL; lr_scale rescales the schedule (manual
 * recovery intervention); refresh_reference != 0 resets the reference policy
 * to the loaded parameters before training. */
GRIDRL_API grl_status grl_train(const grl_config* cfg, const char* data_path,
                                const char* init_ckpt, const char* resume_ckpt,
                                const char* ckpt_out, const char* metrics_out, double lr_scale,
                                int refresh_reference);
GRIDRL_API grl_status grl_eval(const grl_config* cfg, const char* ckpt_path,
                               const char* suite_path, const char* report_out);
GRIDRL_API grl_status grl_run_pipeline(const grl_config* cfg, const char* out_dir);

/* ---- reporting ---- */
/* out_text results are heap strings; release with grl_string_free. */
GRIDRL_API grl_status grl_report_render(const char* report_path, char** out_text);
GRIDRL_API grl_status grl_metrics_csv(const char* metrics_path, const char* csv_out);
GRIDRL_API grl_status grl_compare(const char* report_a, const char* report_b, char** out_text);
GRIDRL_API void grl_string_free(char* s);

/* ---- misc ---- */
/* Cooperative abort: long-running calls flush a checkpoint and return.
 * Safe to call from a signal handler. */
GRIDRL_API void grl_request_abort(void);
GRIDRL_API const char* grl_last_error(void);
GRIDRL_API const char* grl_status_name(grl_status status);
GRIDRL_API const char* grl_version(void);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* GRIDRL_H */
