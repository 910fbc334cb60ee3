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

#include "mmcov/mmcov.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <utility>

#include "mmcov/dump_io.hpp"
#include "mmcov/harness.hpp"
#include "mmcov/pipeline.hpp"
#include "mmcov/record.hpp"

struct mmcov_sample {
    mmcov::SampleInput value;
};

struct mmcov_config {
    mmcov::CoverageConfig value;
};

struct mmcov_result {
    mmcov::SelectionResult value;
    mmcov::StageTimings timings;
    mmcov::CoverageConfig config;
};

namespace {

thread_local std::string g_last_error;

mmcov_status fail(mmcov_status status, std::string message) {
    g_last_error = std::move(message);
    return status;
}

// Exceptions never cross the C boundary.
template <typename Fn>
mmcov_status guarded(Fn&& fn) noexcept {
    try {
        g_last_error.clear();
        fn();
        return MMCOV_OK;
    } catch (const mmcov::Error& e) {
        return fail(static_cast<mmcov_status>(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(MMCOV_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(MMCOV_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(MMCOV_ERR_INTERNAL, "unknown error");
    }
}

#define MMCOV_REQUIRE(cond, what)                                         \
    do {                                                                  \
        if (!(cond)) return fail(MMCOV_ERR_INVALID_ARGUMENT, (what));     \
    } while (0)

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename T>
size_t copy_out(const std::vector<T>& values, T* out, size_t capacity) {
    const size_t count = std::min(values.size(), capacity);
    if (out != nullptr) std::copy_n(values.begin(), count, out);
    return count;
}

}  // namespace

extern "C" {

const char* mmcov_version(void) { return "1.0.0"; }

const char* mmcov_status_string(mmcov_status status) {
    if (status == MMCOV_OK) return "Ok";
    if (status == MMCOV_ERR_INTERNAL) return "Internal";
    if (status >= MMCOV_ERR_INVALID_ARGUMENT && status <= MMCOV_ERR_IO) {
        // error_code_name returns views of string literals.
        return mmcov::error_code_name(static_cast<mmcov::ErrorCode>(status)).data();
    }
    return "Unknown";
}

const char* mmcov_last_error(void) { return g_last_error.c_str(); }

void mmcov_string_free(char* str) { std::free(str); }

mmcov_status mmcov_sample_read(const char* path, mmcov_sample** out) {
    MMCOV_REQUIRE(path != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    return guarded([&] { *out = new mmcov_sample{mmcov::read_dump(path)}; });
}

mmcov_status mmcov_sample_write(const mmcov_sample* sample, const char* path) {
    MMCOV_REQUIRE(sample != nullptr && path != nullptr, "null argument");
    return guarded([&] { mmcov::write_dump(sample->value, path); });
}

mmcov_status mmcov_sample_synth(const mmcov_synth_params* params, mmcov_sample** out) {
    MMCOV_REQUIRE(params != nullptr && out != nullptr, "null argument");
    MMCOV_REQUIRE(params->num_crops == 0 || params->crop_sizes != nullptr, "crop_sizes is null");
    *out = nullptr;
    return guarded([&] {
        mmcov::SynthParams p;
        p.n = params->n;
        p.m = params->m;
        p.o = params->o;
        p.dim_pre = params->dim_pre;
        p.dim_post = params->dim_post;
        p.seed = params->seed;
        p.with_spans = params->with_spans != 0;
        if (params->num_crops > 0) {
            p.crop_sizes.assign(params->crop_sizes, params->crop_sizes + params->num_crops);
        }
        *out = new mmcov_sample{mmcov::synth_sample(p)};
    });
}

mmcov_status mmcov_sample_info_get(const mmcov_sample* sample, mmcov_sample_info* out) {
    MMCOV_REQUIRE(sample != nullptr && out != nullptr, "null argument");
    const auto& s = sample->value;
    *out = mmcov_sample_info{};
    out->n = s.vision_post.rows();
    out->m = s.text.rows();
    out->o = s.agent_text ? s.agent_text->rows() : 0;
    out->dim_pre = s.vision_pre.dim();
    out->dim_post = s.vision_post.dim();
    out->num_spans = s.word_spans ? s.word_spans->size() : 0;
    out->num_crops = s.crop_sizes ? s.crop_sizes->size() : 0;
    out->has_agent = s.agent_text.has_value();
    out->has_spans = s.word_spans.has_value();
    out->has_crops = s.crop_sizes.has_value();
    return MMCOV_OK;
}

void mmcov_sample_free(mmcov_sample* sample) { delete sample; }

mmcov_status mmcov_config_create(mmcov_config** out) {
    MMCOV_REQUIRE(out != nullptr, "null argument");
    return guarded([&] { *out = new mmcov_config{}; });
}

mmcov_status mmcov_config_apply_profile(mmcov_config* config, const char* profile) {
    MMCOV_REQUIRE(config != nullptr && profile != nullptr, "null argument");
    const std::string name(profile);
    if (name == "default") {
        config->value = mmcov::CoverageConfig{};
    } else if (name == "qwen") {
        config->value = mmcov::CoverageConfig::qwen_profile();
    } else {
        return fail(MMCOV_ERR_INVALID_ARGUMENT, "unknown profile '" + name + "'");
    }
    return MMCOV_OK;
}

#define MMCOV_SETTER(name, type, field)                                  \
    mmcov_status mmcov_config_set_##name(mmcov_config* config, type v) { \
        MMCOV_REQUIRE(config != nullptr, "null config");                 \
        config->value.field = v;                                         \
        return MMCOV_OK;                                                 \
    }

MMCOV_SETTER(tau_t, double, tau_t)
MMCOV_SETTER(tau_v, double, tau_v)
MMCOV_SETTER(alpha, double, alpha)
MMCOV_SETTER(budget, size_t, budget)
#undef MMCOV_SETTER

mmcov_status mmcov_config_set_max_tokens(mmcov_config* config, size_t max_tokens) {
    MMCOV_REQUIRE(config != nullptr, "null config");
    if (max_tokens == 0) {
        config->value.max_tokens.reset();
    } else {
        config->value.max_tokens = max_tokens;
    }
    return MMCOV_OK;
}

mmcov_status mmcov_config_set_mode(mmcov_config* config, mmcov_mode mode) {
    MMCOV_REQUIRE(config != nullptr, "null config");
    switch (mode) {
        case MMCOV_MODE_TEXT_VISION: config->value.mode = mmcov::CoverageMode::kTextVisionOnly; break;
        case MMCOV_MODE_VISION_VISION: config->value.mode = mmcov::CoverageMode::kVisionVisionOnly; break;
        case MMCOV_MODE_MULTIMODAL: config->value.mode = mmcov::CoverageMode::kMultimodal; break;
        default: return fail(MMCOV_ERR_INVALID_ARGUMENT, "unknown mode");
    }
    return MMCOV_OK;
}

mmcov_status mmcov_config_set_pooling(mmcov_config* config, mmcov_pooling pooling) {
    MMCOV_REQUIRE(config != nullptr, "null config");
    MMCOV_REQUIRE(pooling >= MMCOV_POOL_NONE && pooling <= MMCOV_POOL_POST_FIRST, "unknown pooling");
    config->value.pooling = static_cast<mmcov::Pooling>(pooling);
    return MMCOV_OK;
}

mmcov_status mmcov_config_set_pool_max_rule(mmcov_config* config, int rule) {
    MMCOV_REQUIRE(config != nullptr, "null config");
    MMCOV_REQUIRE(rule == 0 || rule == 1, "pool max rule must be 0 or 1");
    config->value.pool_max_rule =
        rule == 0 ? mmcov::PoolMaxRule::kElementWise : mmcov::PoolMaxRule::kPeakRow;
    return MMCOV_OK;
}

mmcov_status mmcov_config_set_adaptive_off(mmcov_config* config) {
    MMCOV_REQUIRE(config != nullptr, "null config");
    config->value.adaptive = mmcov::AdaptiveOff{};
    return MMCOV_OK;
}

mmcov_status mmcov_config_set_adaptive_bisection(mmcov_config* config, double lo, double hi,
                                                 double tol) {
    MMCOV_REQUIRE(config != nullptr, "null config");
    mmcov::AdaptiveBisection bisection;
    if (lo > 0.0) bisection.lo = lo;
    if (hi > 0.0) bisection.hi = hi;
    bisection.tol = tol;
    config->value.adaptive = bisection;
    return MMCOV_OK;
}

mmcov_status mmcov_config_set_adaptive_grid(mmcov_config* config, size_t k, const double* grid,
                                            size_t grid_len) {
    MMCOV_REQUIRE(config != nullptr, "null config");
    mmcov::AdaptiveGridKth search;
    search.k = k;
    if (grid != nullptr) search.grid.assign(grid, grid + grid_len);
    config->value.adaptive = search;
    return MMCOV_OK;
}

mmcov_status mmcov_config_set_global_across_crops(mmcov_config* config, int enabled) {
    MMCOV_REQUIRE(config != nullptr, "null config");
    config->value.global_across_crops = enabled != 0;
    return MMCOV_OK;
}

mmcov_status mmcov_config_set_lazy(mmcov_config* config, int enabled) {
    MMCOV_REQUIRE(config != nullptr, "null config");
    config->value.lazy = enabled != 0;
    return MMCOV_OK;
}

double mmcov_config_tau_t(const mmcov_config* config) { return config->value.tau_t; }
double mmcov_config_tau_v(const mmcov_config* config) { return config->value.tau_v; }
double mmcov_config_alpha(const mmcov_config* config) { return config->value.alpha; }
size_t mmcov_config_budget(const mmcov_config* config) { return config->value.budget; }

mmcov_status mmcov_config_validate(const mmcov_config* config) {
    MMCOV_REQUIRE(config != nullptr, "null config");
    return guarded([&] { config->value.validate(); });
}

void mmcov_config_free(mmcov_config* config) { delete config; }

mmcov_status mmcov_select(const mmcov_sample* sample, const mmcov_config* config, size_t threads,
                          mmcov_result** out) {
    MMCOV_REQUIRE(sample != nullptr && config != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    return guarded([&] {
        auto result = std::make_unique<mmcov_result>();
        result->config = config->value;
        result->value = mmcov::select_tokens(sample->value, config->value,
                                             {std::max<size_t>(threads, 1), &result->timings});
        *out = result.release();
    });
}

size_t mmcov_result_count(const mmcov_result* result) { return result->value.selected.size(); }

size_t mmcov_result_indices(const mmcov_result* result, size_t* out, size_t capacity) {
    return copy_out(result->value.selected, out, capacity);
}

size_t mmcov_result_gains(const mmcov_result* result, double* out, size_t capacity) {
    return copy_out(result->value.gains, out, capacity);
}

double mmcov_result_objective_tv(const mmcov_result* result) { return result->value.objective_tv; }
double mmcov_result_objective_vv(const mmcov_result* result) { return result->value.objective_vv; }
double mmcov_result_objective_fused(const mmcov_result* result) {
    return result->value.objective_fused;
}
double mmcov_result_effective_tau_v(const mmcov_result* result) {
    return result->value.effective_tau_v;
}
uint64_t mmcov_result_gain_evaluations(const mmcov_result* result) {
    return result->value.gain_evaluations;
}

void mmcov_result_timings(const mmcov_result* result, mmcov_timings* out) {
    const auto& t = result->timings;
    *out = mmcov_timings{t.normalize_ns, t.pool_ns,   t.similarity_ns, t.calibrate_ns,
                         t.adapt_ns,     t.select_ns, t.total_ns()};
}

mmcov_status mmcov_result_to_json(const mmcov_result* result, const char* sample_id,
                                  int include_timing, char** out_json) {
    MMCOV_REQUIRE(result != nullptr && sample_id != nullptr && out_json != nullptr, "null argument");
    *out_json = nullptr;
    return guarded([&] {
        *out_json = copy_string(mmcov::result_record_json(
            sample_id, result->value, result->config, include_timing ? &result->timings : nullptr));
    });
}

void mmcov_result_free(mmcov_result* result) { delete result; }

mmcov_status mmcov_ic_metric(double perf_all, double perf_zero, double* out) {
    MMCOV_REQUIRE(out != nullptr, "null argument");
    return guarded([&] { *out = mmcov::ic_metric(perf_all, perf_zero); });
}

mmcov_status mmcov_plan_budget(const size_t* crop_sizes, size_t num_crops, size_t max_budget,
                               size_t max_tokens, size_t* per_crop, size_t* realized) {
    MMCOV_REQUIRE(crop_sizes != nullptr && per_crop != nullptr, "null argument");
    return guarded([&] {
        const auto plan =
            mmcov::plan_budget({crop_sizes, num_crops}, max_budget, max_tokens);
        std::copy(plan.per_crop.begin(), plan.per_crop.end(), per_crop);
        if (realized != nullptr) *realized = plan.realized();
    });
}

void mmcov_verify_defaults(mmcov_verify_params* params) {
    const mmcov::VerifyParams d;
    *params = mmcov_verify_params{d.trials, d.seed, d.max_n, d.max_k, d.chains, 0};
}

mmcov_status mmcov_verify(const mmcov_verify_params* params, mmcov_verify_report* out,
                          char** report_text) {
    MMCOV_REQUIRE(params != nullptr && out != nullptr, "null argument");
    return guarded([&] {
        mmcov::VerifyParams p;
        p.trials = params->trials;
        p.seed = params->seed;
        p.max_n = params->max_n;
        p.max_k = params->max_k;
        p.chains = params->chains;
        p.inject_fault = params->inject_fault != 0;
        const auto r = mmcov::run_verify(p);
        *out = mmcov_verify_report{r.trials,           r.min_ratio,
                                   r.min_ratio_single, r.min_ratio_fused,
                                   r.bound_violations, r.chains,
                                   r.submodular_violations, r.monotone_violations,
                                   r.lazy_mismatches,  r.ok() ? 1 : 0};
        if (report_text != nullptr) *report_text = copy_string(mmcov::format_verify_report(r));
    });
}

void mmcov_bench_defaults(mmcov_bench_params* params) {
    const mmcov::BenchParams d;
    *params = mmcov_bench_params{d.n, d.m, d.dim, d.budget, d.reps, d.threads, d.seed, nullptr, 0};
}

mmcov_status mmcov_bench(const mmcov_bench_params* params, mmcov_bench_report* out,
                         char** report_text) {
    MMCOV_REQUIRE(params != nullptr && out != nullptr, "null argument");
    MMCOV_REQUIRE(params->num_crops == 0 || params->crop_sizes != nullptr, "crop_sizes is null");
    return guarded([&] {
        mmcov::BenchParams p;
        p.n = params->n;
        p.m = params->m;
        p.dim = params->dim;
        p.budget = params->budget;
        p.reps = params->reps;
        p.threads = std::max<size_t>(params->threads, 1);
        p.seed = params->seed;
        if (params->num_crops > 0) {
            p.crop_sizes.assign(params->crop_sizes, params->crop_sizes + params->num_crops);
        }
        const auto r = mmcov::run_bench(p);
        double total = 0.0;
        for (const auto& s : r.stages) {
            if (s.stage == "total") total = s.mean_ms;
        }
        *out = mmcov_bench_report{r.eager_evaluations, r.lazy_evaluations, total,
                                  r.identical_selections ? 1 : 0};
        if (report_text != nullptr) *report_text = copy_string(mmcov::format_bench_report(r));
    });
}

}  // extern "C"
