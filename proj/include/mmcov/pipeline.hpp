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

// End-to-end selection for one sample: normalize, pool, enrich with agent
// text, build and calibrate similarities, then greedy selection under a
// budget, optionally split across image crops.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mmcov/core_types.hpp"
#include "mmcov/similarity.hpp"

namespace mmcov {

struct SampleInput {
    TokenMatrix vision_pre;
    TokenMatrix vision_post;
    TokenMatrix text;
    std::optional<TokenMatrix> agent_text;
    std::optional<WordSpans> word_spans;
    std::optional<std::vector<std::size_t>> crop_sizes;

    std::size_t vision_tokens() const noexcept { return vision_post.rows(); }

    /// Throws Error(kInvariantViolation) naming the first broken invariant.
    void validate() const;

    friend bool operator==(const SampleInput&, const SampleInput&) = default;
};

struct BudgetPlan {
    std::size_t global_budget = 0;
    double ratio = 0.0;
    std::vector<std::size_t> per_crop;

    std::size_t realized() const noexcept;
};

/// Splits `max_budget` over crops at the fixed ratio max_budget / max_tokens:
/// floor(size * ratio) per crop, at least one token per crop when the budget
/// is non-zero, never more than the crop holds.
BudgetPlan plan_budget(std::span<const std::size_t> crop_sizes, std::size_t max_budget,
                       std::size_t max_tokens);

struct StageTimings {
    std::uint64_t normalize_ns = 0;
    std::uint64_t pool_ns = 0;
    std::uint64_t similarity_ns = 0;
    std::uint64_t calibrate_ns = 0;
    std::uint64_t adapt_ns = 0;
    std::uint64_t select_ns = 0;

    std::uint64_t total_ns() const noexcept {
        return normalize_ns + pool_ns + similarity_ns + calibrate_ns + adapt_ns + select_ns;
    }
};

struct SelectOptions {
    std::size_t threads = 1;
    StageTimings* timings = nullptr;
};

SelectionResult select_tokens(const SampleInput& input, const CoverageConfig& config,
                              const SelectOptions& options = {});

/// Image Contribution: (perf_all - perf_zero) / perf_zero.
double ic_metric(double perf_all, double perf_zero);

struct SynthParams {
    std::size_t n = 576;
    std::size_t m = 32;
    std::size_t o = 0;
    std::size_t dim_pre = 64;
    std::size_t dim_post = 64;
    std::uint64_t seed = 0;
    bool with_spans = false;
    std::vector<std::size_t> crop_sizes;  // empty: no crop section
};

/// Seeded sample with unit-norm Gaussian rows; identical params give
/// bit-identical samples.
SampleInput synth_sample(const SynthParams& params);

TokenMatrix slice_rows(const TokenMatrix& m, std::size_t begin, std::size_t end);

}  // namespace mmcov
