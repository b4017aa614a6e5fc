/*
 * flexmatch - online power-matching market simulator with a learnable policy.
 *
 * C interface over the simulation core: opaque handles, integer status codes,
 * and a thread-local error message. Every object returned through an out
 * parameter must be released with the matching *_close function.
 */
#ifndef FLEXMATCH_H
#define FLEXMATCH_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(FXM_BUILD_SHARED)
#    define FXM_API __declspec(dllexport)
#  else
#    define FXM_API __declspec(dllimport)
#  endif
#else
#  define FXM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fxm_status {
    FXM_OK = 0,
    FXM_ERR_USAGE = 1,   /* bad arguments, unknown policy/algorithm names */
    FXM_ERR_CONFIG = 2,  /* unreadable or malformed configuration */
    FXM_ERR_IO = 3,      /* file read/write failures */
    FXM_ERR_RUNTIME = 4  /* infeasible decisions, solver or training failures */
} fxm_status;

typedef struct fxm_config fxm_config;   /* a scenario: single profile or hybrid */
typedef struct fxm_policy fxm_policy;   /* a runnable matching policy */
typedef struct fxm_result fxm_result;   /* per-epoch welfare series */

FXM_API const char* fxm_version(void);

/* Message for the most recent failure on this thread; never NULL. */
FXM_API const char* fxm_last_error(void);

/* --- configuration ------------------------------------------------------ */

FXM_API fxm_status fxm_config_open(const char* path, fxm_config** out);
FXM_API fxm_status fxm_config_parse(const char* json_text, const char* base_dir, fxm_config** out);
/* Echo of the validated configuration as JSON; free with fxm_string_free. */
FXM_API fxm_status fxm_config_to_json(const fxm_config* config, char** out_text);
FXM_API int fxm_config_is_hybrid(const fxm_config* config);
FXM_API void fxm_config_close(fxm_config* config);
FXM_API void fxm_string_free(char* text);

/* --- policies ------------------------------------------------------------ */

/*
 * name: "ma" | "mh" | "med" for the online heuristics, or "la1" | "la2" for a
 * freshly initialized learnable policy (seeded by `seed`).
 */
FXM_API fxm_status fxm_policy_open(const fxm_config* config, const char* name, uint64_t seed,
                                   fxm_policy** out);
FXM_API fxm_status fxm_policy_open_checkpoint(const char* path, fxm_policy** out);
FXM_API fxm_status fxm_policy_save_checkpoint(const fxm_policy* policy, const char* path);
FXM_API void fxm_policy_close(fxm_policy* policy);

/* --- evaluation ---------------------------------------------------------- */

/*
 * Runs `epochs` epochs starting at `first_epoch` (1-based). Scenario draws
 * depend only on (config, epoch index); `seed` drives the stochastic policy's
 * sampling and is ignored by the rule-based heuristics. `trace_path`, when not
 * NULL, receives one JSON record per period.
 */
FXM_API fxm_status fxm_evaluate(const fxm_config* config, fxm_policy* policy,
                                uint64_t first_epoch, uint64_t epochs, uint64_t seed,
                                const char* trace_path, fxm_result** out);

/* Hindsight-optimal welfare for the same realizations. */
FXM_API fxm_status fxm_evaluate_oracle(const fxm_config* config, uint64_t first_epoch,
                                       uint64_t epochs, const char* trace_path, fxm_result** out);

/* --- training ------------------------------------------------------------ */

/*
 * Trains the learnable policy with the vanilla ("la1") or actor-critic
 * ("la2", lookahead k) policy-gradient algorithm. `batch` and `lookahead_k`
 * may be 0 to use the defaults (80 for la1, 20/AC-1 for la2). Pass
 * `resume_path` to continue a previous session bit-exactly. `checkpoint_path`
 * receives the final session checkpoint, rewritten every
 * `checkpoint_interval` epochs when that is nonzero. `curve_path` receives
 * the per-epoch learning curve as tab-delimited text. The result holds the
 * training curve's welfare series.
 */
FXM_API fxm_status fxm_train(const fxm_config* config, const char* algorithm, uint64_t epochs,
                             uint64_t batch, int lookahead_k, uint64_t seed,
                             const char* resume_path, const char* checkpoint_path,
                             uint64_t checkpoint_interval, const char* curve_path,
                             fxm_result** out);

/* --- results ------------------------------------------------------------- */

FXM_API size_t fxm_result_size(const fxm_result* result);
FXM_API fxm_status fxm_result_epoch(const fxm_result* result, size_t index, uint64_t* out);
FXM_API fxm_status fxm_result_welfare(const fxm_result* result, size_t index, double* out);
FXM_API fxm_status fxm_result_mean(const fxm_result* result, double* out);
FXM_API void fxm_result_close(fxm_result* result);

/* --- verification --------------------------------------------------------- */

/*
 * Runs the built-in invariant and oracle suites (feasibility closure, nu
 * idempotence, hindsight-vs-brute-force, dominance, gradient probe).
 * `config` may be NULL. The report text must be freed with fxm_string_free;
 * *failures_out receives the number of failed checks.
 */
FXM_API fxm_status fxm_verify(const fxm_config* config, uint64_t seed, char** report_out,
                              int* failures_out);

#ifdef __cplusplus
}
#endif

#endif /* FLEXMATCH_H */
