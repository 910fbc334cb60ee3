// Copyright 2026 The MMCov Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/*
 * C interface to the vision-token coverage engine.
 *
 * Objects are opaque handles created and released through this API. Every
 * fallible call returns an mmcov_status; on failure the calling thread's
 * mmcov_last_error() holds a diagnostic. Handles may be shared read-only
 * across threads; a config must not be mutated while another thread selects
 * with it.
 */

#ifndef MMCOV_MMCOV_H_
#define MMCOV_MMCOV_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define MMCOV_API __declspec(dllexport)
#else
#  define MMCOV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mmcov_status {
    MMCOV_OK = 0,
    MMCOV_ERR_INVALID_ARGUMENT = 1,
    MMCOV_ERR_DEGENERATE_ROW = 2,
    MMCOV_ERR_DIM_MISMATCH = 3,
    MMCOV_ERR_NON_POSITIVE_TAU = 4,
    MMCOV_ERR_BAD_SPANS = 5,
    MMCOV_ERR_INDEX_OUT_OF_RANGE = 6,
    MMCOV_ERR_SOURCE_COUNT_MISMATCH = 7,
    MMCOV_ERR_INSTANCE_TOO_LARGE = 8,
    MMCOV_ERR_BUDGET_EXCEEDS_TOKENS = 9,
    MMCOV_ERR_ZERO_BASELINE = 10,
    MMCOV_ERR_BAD_MAGIC = 11,
    MMCOV_ERR_BAD_VERSION = 12,
    MMCOV_ERR_TRUNCATED_FILE = 13,
    MMCOV_ERR_INVARIANT_VIOLATION = 14,
    MMCOV_ERR_IO = 15,
    MMCOV_ERR_INTERNAL = 99
} mmcov_status;

typedef enum mmcov_mode {
    MMCOV_MODE_TEXT_VISION = 0,
    MMCOV_MODE_VISION_VISION = 1,
    MMCOV_MODE_MULTIMODAL = 2
} mmcov_mode;

typedef enum mmcov_pooling {
    MMCOV_POOL_NONE = 0,
    MMCOV_POOL_PRE_MEAN = 1,
    MMCOV_POOL_PRE_MAX = 2,
    MMCOV_POOL_PRE_FIRST = 3,
    MMCOV_POOL_POST_MEAN = 4,
    MMCOV_POOL_POST_MAX = 5,
    MMCOV_POOL_POST_FIRST = 6
} mmcov_pooling;

typedef struct mmcov_sample mmcov_sample;
typedef struct mmcov_config mmcov_config;
typedef struct mmcov_result mmcov_result;

MMCOV_API const char* mmcov_version(void);
MMCOV_API const char* mmcov_status_string(mmcov_status status);
/* Message for the last failed call on this thread; "" if none. */
MMCOV_API const char* mmcov_last_error(void);
/* Frees strings returned through char** out-parameters. */
MMCOV_API void mmcov_string_free(char* str);

/* ---- samples ---- */

typedef struct mmcov_sample_info {
    size_t n, m, o, dim_pre, dim_post, num_spans, num_crops;
    int has_agent, has_spans, has_crops;
} mmcov_sample_info;

typedef struct mmcov_synth_params {
    size_t n, m, o, dim_pre, dim_post;
    uint64_t seed;
    int with_spans;
    const size_t* crop_sizes; /* may be NULL */
    size_t num_crops;
} mmcov_synth_params;

MMCOV_API mmcov_status mmcov_sample_read(const char* path, mmcov_sample** out);
MMCOV_API mmcov_status mmcov_sample_write(const mmcov_sample* sample, const char* path);
MMCOV_API mmcov_status mmcov_sample_synth(const mmcov_synth_params* params, mmcov_sample** out);
MMCOV_API mmcov_status mmcov_sample_info_get(const mmcov_sample* sample, mmcov_sample_info* out);
MMCOV_API void mmcov_sample_free(mmcov_sample* sample);

/* ---- configuration ---- */

MMCOV_API mmcov_status mmcov_config_create(mmcov_config** out);
/* "default" or "qwen" (tau_t = 0.01). Resets every field. */
MMCOV_API mmcov_status mmcov_config_apply_profile(mmcov_config* config, const char* profile);
MMCOV_API mmcov_status mmcov_config_set_tau_t(mmcov_config* config, double tau_t);
MMCOV_API mmcov_status mmcov_config_set_tau_v(mmcov_config* config, double tau_v);
MMCOV_API mmcov_status mmcov_config_set_alpha(mmcov_config* config, double alpha);
MMCOV_API mmcov_status mmcov_config_set_budget(mmcov_config* config, size_t budget);
/* 0 clears max_tokens (the sample's token count is then used). */
MMCOV_API mmcov_status mmcov_config_set_max_tokens(mmcov_config* config, size_t max_tokens);
MMCOV_API mmcov_status mmcov_config_set_mode(mmcov_config* config, mmcov_mode mode);
MMCOV_API mmcov_status mmcov_config_set_pooling(mmcov_config* config, mmcov_pooling pooling);
/* 0 = element-wise max, 1 = row holding the peak feature value. */
MMCOV_API mmcov_status mmcov_config_set_pool_max_rule(mmcov_config* config, int rule);
MMCOV_API mmcov_status mmcov_config_set_adaptive_off(mmcov_config* config);
/* lo/hi <= 0 select the default interval (tau_t, tau_v]. */
MMCOV_API mmcov_status mmcov_config_set_adaptive_bisection(mmcov_config* config, double lo,
                                                           double hi, double tol);
/* grid == NULL keeps the default grid {0.05, 0.1, 0.15, 0.2}. */
MMCOV_API mmcov_status mmcov_config_set_adaptive_grid(mmcov_config* config, size_t k,
                                                      const double* grid, size_t grid_len);
MMCOV_API mmcov_status mmcov_config_set_global_across_crops(mmcov_config* config, int enabled);
MMCOV_API mmcov_status mmcov_config_set_lazy(mmcov_config* config, int enabled);
MMCOV_API double mmcov_config_tau_t(const mmcov_config* config);
MMCOV_API double mmcov_config_tau_v(const mmcov_config* config);
MMCOV_API double mmcov_config_alpha(const mmcov_config* config);
MMCOV_API size_t mmcov_config_budget(const mmcov_config* config);
/* Checks every config invariant without running a selection. */
MMCOV_API mmcov_status mmcov_config_validate(const mmcov_config* config);
MMCOV_API void mmcov_config_free(mmcov_config* config);

/* ---- selection ---- */

typedef struct mmcov_timings {
    uint64_t normalize_ns, pool_ns, similarity_ns, calibrate_ns, adapt_ns, select_ns, total_ns;
} mmcov_timings;

MMCOV_API mmcov_status mmcov_select(const mmcov_sample* sample, const mmcov_config* config,
                                    size_t threads, mmcov_result** out);
MMCOV_API size_t mmcov_result_count(const mmcov_result* result);
/* Copies up to `capacity` entries; returns the number copied. */
MMCOV_API size_t mmcov_result_indices(const mmcov_result* result, size_t* out, size_t capacity);
MMCOV_API size_t mmcov_result_gains(const mmcov_result* result, double* out, size_t capacity);
MMCOV_API double mmcov_result_objective_tv(const mmcov_result* result);
MMCOV_API double mmcov_result_objective_vv(const mmcov_result* result);
MMCOV_API double mmcov_result_objective_fused(const mmcov_result* result);
MMCOV_API double mmcov_result_effective_tau_v(const mmcov_result* result);
MMCOV_API uint64_t mmcov_result_gain_evaluations(const mmcov_result* result);
MMCOV_API void mmcov_result_timings(const mmcov_result* result, mmcov_timings* out);
/* One JSON object (no newline). include_timing != 0 adds wall-clock fields. */
MMCOV_API mmcov_status mmcov_result_to_json(const mmcov_result* result, const char* sample_id,
                                            int include_timing, char** out_json);
MMCOV_API void mmcov_result_free(mmcov_result* result);

/* ---- utilities ---- */

MMCOV_API mmcov_status mmcov_ic_metric(double perf_all, double perf_zero, double* out);
/* per_crop must hold num_crops entries. */
MMCOV_API mmcov_status mmcov_plan_budget(const size_t* crop_sizes, size_t num_crops,
                                         size_t max_budget, size_t max_tokens, size_t* per_crop,
                                         size_t* realized);

/* ---- harnesses ---- */

typedef struct mmcov_verify_params {
    size_t trials;
    uint64_t seed;
    size_t max_n, max_k, chains;
    int inject_fault;
} mmcov_verify_params;

typedef struct mmcov_verify_report {
    size_t trials;
    double min_ratio, min_ratio_single, min_ratio_fused;
    size_t bound_violations, chains, submodular_violations, monotone_violations, lazy_mismatches;
    int ok;
} mmcov_verify_report;

MMCOV_API void mmcov_verify_defaults(mmcov_verify_params* params);
/* report_text (optional) receives a printable summary. */
MMCOV_API mmcov_status mmcov_verify(const mmcov_verify_params* params, mmcov_verify_report* out,
                                    char** report_text);

typedef struct mmcov_bench_params {
    size_t n, m, dim, budget, reps, threads;
    uint64_t seed;
    const size_t* crop_sizes; /* may be NULL */
    size_t num_crops;
} mmcov_bench_params;

typedef struct mmcov_bench_report {
    uint64_t eager_evaluations, lazy_evaluations;
    double total_mean_ms;
    int identical_selections;
} mmcov_bench_report;

MMCOV_API void mmcov_bench_defaults(mmcov_bench_params* params);
MMCOV_API mmcov_status mmcov_bench(const mmcov_bench_params* params, mmcov_bench_report* out,
                                   char** report_text);

#ifdef __cplusplus
}
#endif

#endif /* MMCOV_MMCOV_H_ */
