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

#include "mmcov/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mmcov/coverage.hpp"

namespace mmcov {

namespace {

void violation(const std::string& what) { throw Error(ErrorCode::kInvariantViolation, what); }

bool all_finite(std::span<const float> data) {
    for (float x : data) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

class StageClock {
public:
    explicit StageClock(std::uint64_t* sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}
    ~StageClock() {
        if (sink_ == nullptr) return;
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        *sink_ += static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(elapsed).count());
    }
    StageClock(const StageClock&) = delete;
    StageClock& operator=(const StageClock&) = delete;

private:
    std::uint64_t* sink_;
    std::chrono::steady_clock::time_point start_;
};

std::uint64_t* stage(const SelectOptions& options, std::uint64_t StageTimings::*field) {
    return options.timings == nullptr ? nullptr : &(options.timings->*field);
}

std::optional<PoolMethod> pool_method(Pooling pooling) {
    switch (pooling) {
        case Pooling::kPreMean:
        case Pooling::kPostMean: return PoolMethod::kMean;
        case Pooling::kPreMax:
        case Pooling::kPostMax: return PoolMethod::kMax;
        case Pooling::kPreFirst:
        case Pooling::kPostFirst: return PoolMethod::kFirst;
        case Pooling::kNone: break;
    }
    return std::nullopt;
}

bool is_pre_pool(Pooling p) {
    return p == Pooling::kPreMean || p == Pooling::kPreMax || p == Pooling::kPreFirst;
}

// Normalized, pooled and enriched inputs shared by every crop.
struct Prepared {
    TokenMatrix text;
    TokenMatrix vision_pre;
    TokenMatrix vision_post;
    std::optional<WordSpans> post_spans;  // spans over the enriched text rows
};

Prepared prepare(const SampleInput& input, const CoverageConfig& config,
                 const SelectOptions& options) {
    std::optional<TokenMatrix> text, pre, post, agent;
    {
        StageClock clock(stage(options, &StageTimings::normalize_ns));
        text = normalize(input.text);
        pre = normalize(input.vision_pre);
        post = normalize(input.vision_post);
        if (input.agent_text) agent = normalize(*input.agent_text);
    }
    std::optional<WordSpans> post_spans;
    if (const auto method = pool_method(config.pooling)) {
        StageClock clock(stage(options, &StageTimings::pool_ns));
        if (!input.word_spans) {
            throw Error(ErrorCode::kInvalidArgument, "word pooling requires word spans in the sample");
        }
        if (is_pre_pool(config.pooling)) {
            text = pool_pre(*text, *input.word_spans, *method, config.pool_max_rule);
        } else {
            auto spans = input.word_spans->spans();
            // Agent rows are their own words.
            const std::size_t m = text->rows();
            const std::size_t o = agent ? agent->rows() : 0;
            for (std::size_t r = m; r < m + o; ++r) spans.emplace_back(r, r + 1);
            post_spans = WordSpans(std::move(spans));
        }
    }
    if (agent) text = concat_agent(*text, *agent);
    return Prepared{std::move(*text), std::move(*pre), std::move(*post), std::move(post_spans)};
}

SelectionResult select_range(const Prepared& prepared, const CoverageConfig& config,
                             std::size_t begin, std::size_t end, std::size_t budget,
                             const SelectOptions& options) {
    const bool whole = begin == 0 && end == prepared.vision_post.rows();
    const TokenMatrix post_slice = whole ? prepared.vision_post : slice_rows(prepared.vision_post, begin, end);
    const TokenMatrix pre_slice = whole ? prepared.vision_pre : slice_rows(prepared.vision_pre, begin, end);

    std::optional<SimilarityMatrix> tv_raw, vv_raw;
    {
        StageClock clock(stage(options, &StageTimings::similarity_ns));
        tv_raw = build_tv(prepared.text, post_slice, options.threads);
        vv_raw = build_vv(pre_slice, options.threads);
    }
    if (prepared.post_spans) {
        StageClock clock(stage(options, &StageTimings::pool_ns));
        tv_raw = pool_post(*tv_raw, *prepared.post_spans, *pool_method(config.pooling));
    }
    std::optional<SimilarityMatrix> tv;
    {
        StageClock clock(stage(options, &StageTimings::calibrate_ns));
        tv = calibrate(*tv_raw, config.tau_t);
    }
    double tau_v = config.tau_v;
    {
        StageClock clock(stage(options, &StageTimings::adapt_ns));
        if (const auto* bis = std::get_if<AdaptiveBisection>(&config.adaptive)) {
            tau_v = adapt_tau_bisection(*tv, *vv_raw, bis->lo.value_or(config.tau_t),
                                        bis->hi.value_or(config.tau_v), bis->tol)
                        .tau;
        } else if (const auto* grid = std::get_if<AdaptiveGridKth>(&config.adaptive)) {
            tau_v = adapt_tau_grid_kth(*tv, *vv_raw, grid->k, grid->grid).tau;
        }
    }
    std::optional<SimilarityMatrix> vv;
    {
        StageClock clock(stage(options, &StageTimings::calibrate_ns));
        vv = calibrate(*vv_raw, tau_v);
    }

    StageClock clock(stage(options, &StageTimings::select_ns));
    SelectionResult result;
    switch (config.mode) {
        case CoverageMode::kTextVisionOnly:
            result = greedy(CoverageObjective(*tv), budget, config.lazy);
            break;
        case CoverageMode::kVisionVisionOnly:
            result = greedy(CoverageObjective(*vv), budget, config.lazy);
            break;
        case CoverageMode::kMultimodal:
            result = greedy(CoverageObjective(*tv, *vv, config.alpha), budget, config.lazy);
            break;
    }
    result.objective_tv = coverage_value(result.selected, *tv);
    result.objective_vv = coverage_value(result.selected, *vv);
    switch (config.mode) {
        case CoverageMode::kTextVisionOnly: result.objective_fused = result.objective_tv; break;
        case CoverageMode::kVisionVisionOnly: result.objective_fused = result.objective_vv; break;
        case CoverageMode::kMultimodal:
            result.objective_fused = result.objective_tv + config.alpha * result.objective_vv;
            break;
    }
    result.effective_tau_v = tau_v;
    result.segment_tau_v = {tau_v};
    for (std::size_t& j : result.selected) j += begin;
    return result;
}

}  // namespace

void SampleInput::validate() const {
    const std::size_t n = vision_post.rows();
    if (vision_pre.rows() != n) {
        violation("vision_pre has " + std::to_string(vision_pre.rows()) +
                  " rows, vision_post has " + std::to_string(n));
    }
    if (text.dim() != vision_post.dim()) violation("text dim differs from vision_post dim");
    if (agent_text && agent_text->dim() != text.dim()) violation("agent dim differs from text dim");
    if (!all_finite(vision_pre.data()) || !all_finite(vision_post.data()) ||
        !all_finite(text.data()) || (agent_text && !all_finite(agent_text->data()))) {
        violation("embedding payload contains non-finite values");
    }
    if (word_spans) {
        try {
            word_spans->validate(text.rows());
        } catch (const Error& e) {
            violation(std::string("word spans: ") + e.what());
        }
    }
    if (crop_sizes) {
        if (crop_sizes->empty()) violation("crop section present but empty");
        std::size_t total = 0;
        for (std::size_t size : *crop_sizes) {
            if (size == 0) violation("crop of size 0");
            total += size;
        }
        if (total != n) {
            violation("crop sizes sum to " + std::to_string(total) + ", expected " +
                      std::to_string(n));
        }
    }
}

std::size_t BudgetPlan::realized() const noexcept {
    return std::accumulate(per_crop.begin(), per_crop.end(), std::size_t{0});
}

BudgetPlan plan_budget(std::span<const std::size_t> crop_sizes, std::size_t max_budget,
                       std::size_t max_tokens) {
    if (crop_sizes.empty()) throw Error(ErrorCode::kInvalidArgument, "no crops to budget");
    if (max_tokens == 0 || max_budget > max_tokens) {
        throw Error(ErrorCode::kBudgetExceedsTokens,
                    "budget " + std::to_string(max_budget) + " exceeds max tokens " +
                        std::to_string(max_tokens));
    }
    BudgetPlan plan;
    plan.global_budget = max_budget;
    plan.ratio = static_cast<double>(max_budget) / static_cast<double>(max_tokens);
    for (std::size_t size : crop_sizes) {
        if (size == 0) throw Error(ErrorCode::kInvalidArgument, "crop of size 0");
        // Integer floor of size * budget / max_tokens avoids ratio rounding.
        std::size_t share = size * max_budget / max_tokens;
        if (max_budget > 0) share = std::max<std::size_t>(share, 1);
        plan.per_crop.push_back(std::min(share, size));
    }
    return plan;
}

TokenMatrix slice_rows(const TokenMatrix& m, std::size_t begin, std::size_t end) {
    const auto data = m.data();
    return TokenMatrix(end - begin, m.dim(), m.role(),
                       std::vector<float>(data.begin() + static_cast<std::ptrdiff_t>(begin * m.dim()),
                                          data.begin() + static_cast<std::ptrdiff_t>(end * m.dim())));
}

SelectionResult select_tokens(const SampleInput& input, const CoverageConfig& config,
                              const SelectOptions& options) {
    config.validate();
    input.validate();
    const Prepared prepared = prepare(input, config, options);
    const std::size_t n = input.vision_tokens();

    if (!input.crop_sizes) {
        return select_range(prepared, config, 0, n, std::min(config.budget, n), options);
    }
    const auto& crops = *input.crop_sizes;
    const BudgetPlan plan = plan_budget(crops, config.budget, config.max_tokens.value_or(n));
    if (config.global_across_crops) {
        return select_range(prepared, config, 0, n, plan.realized(), options);
    }

    SelectionResult merged;
    std::size_t offset = 0;
    double tau_sum = 0.0;
    merged.segments.clear();
    for (std::size_t c = 0; c < crops.size(); ++c) {
        SelectionResult part =
            select_range(prepared, config, offset, offset + crops[c], plan.per_crop[c], options);
        merged.selected.insert(merged.selected.end(), part.selected.begin(), part.selected.end());
        merged.gains.insert(merged.gains.end(), part.gains.begin(), part.gains.end());
        merged.objective_tv += part.objective_tv;
        merged.objective_vv += part.objective_vv;
        merged.objective_fused += part.objective_fused;
        merged.gain_evaluations += part.gain_evaluations;
        merged.segments.push_back(part.selected.size());
        merged.segment_tau_v.push_back(part.effective_tau_v);
        tau_sum += part.effective_tau_v;
        offset += crops[c];
    }
    merged.effective_tau_v = tau_sum / static_cast<double>(crops.size());
    return merged;
}

double ic_metric(double perf_all, double perf_zero) {
    if (!(perf_zero > 0.0)) {
        throw Error(ErrorCode::kZeroBaseline, "zero-token performance must be > 0");
    }
    return (perf_all - perf_zero) / perf_zero;
}

namespace {

TokenMatrix gaussian_rows(std::size_t rows, std::size_t dim, TokenRole role, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<float> data(rows * dim);
    std::vector<double> row(dim);
    for (std::size_t i = 0; i < rows; ++i) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& x : row) {
                x = normal(rng);
                norm += x * x;
            }
            norm = std::sqrt(norm);
        } while (norm < 1e-6);
        for (std::size_t d = 0; d < dim; ++d) data[i * dim + d] = static_cast<float>(row[d] / norm);
    }
    return TokenMatrix(rows, dim, role, std::move(data));
}

}  // namespace

SampleInput synth_sample(const SynthParams& p) {
    if (p.n == 0 || p.m == 0 || p.dim_pre == 0 || p.dim_post == 0) {
        throw Error(ErrorCode::kInvalidArgument, "synthetic sample counts must be >= 1");
    }
    std::mt19937_64 rng(p.seed);
    SampleInput sample{
        gaussian_rows(p.n, p.dim_pre, TokenRole::kVisionPre, rng),
        gaussian_rows(p.n, p.dim_post, TokenRole::kVisionPost, rng),
        gaussian_rows(p.m, p.dim_post, TokenRole::kTextQuery, rng),
        std::nullopt,
        std::nullopt,
        std::nullopt,
    };
    if (p.o > 0) sample.agent_text = gaussian_rows(p.o, p.dim_post, TokenRole::kAgentText, rng);
    if (p.with_spans) {
        std::uniform_int_distribution<std::size_t> length(1, 3);
        std::vector<std::pair<std::size_t, std::size_t>> spans;
        for (std::size_t start = 0; start < p.m;) {
            const std::size_t end = std::min(p.m, start + length(rng));
            spans.emplace_back(start, end);
            start = end;
        }
        sample.word_spans = WordSpans(std::move(spans));
    }
    if (!p.crop_sizes.empty()) sample.crop_sizes = p.crop_sizes;
    sample.validate();
    return sample;
}

}  // namespace mmcov
