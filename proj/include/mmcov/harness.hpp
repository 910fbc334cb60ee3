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

// Oracle-backed verification and timing harnesses behind `mmcov verify` and
// `mmcov bench`.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mmcov/core_types.hpp"

namespace mmcov {

/// 1 - 1/e.
inline constexpr double kGreedyBound = 0.63212055882855767;

struct VerifyParams {
    std::size_t trials = 200;
    std::uint64_t seed = 0;
    std::size_t max_n = 12;
    std::size_t max_k = 4;
    std::size_t chains = 10000;
    // Negative control: the "greedy" under test picks the worst candidate.
    bool inject_fault = false;
};

struct VerifyReport {
    std::size_t trials = 0;
    double min_ratio = 1.0;  // over single and fused runs
    double min_ratio_single = 1.0;
    double min_ratio_fused = 1.0;
    std::size_t bound_violations = 0;
    std::size_t chains = 0;
    std::size_t submodular_violations = 0;
    std::size_t monotone_violations = 0;
    std::size_t lazy_mismatches = 0;

    bool ok() const noexcept {
        return bound_violations == 0 && submodular_violations == 0 && monotone_violations == 0 &&
               lazy_mismatches == 0;
    }
};

VerifyReport run_verify(const VerifyParams& params);
std::string format_verify_report(const VerifyReport& report);

struct BenchParams {
    std::size_t n = 576;
    std::size_t m = 40;
    std::size_t dim = 4096;
    std::size_t budget = 64;
    std::size_t reps = 3;
    std::size_t threads = 1;
    std::uint64_t seed = 0;
    std::vector<std::size_t> crop_sizes;  // empty: one image
};

struct StageStats {
    std::string stage;
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
};

struct BenchReport {
    std::vector<StageStats> stages;
    std::uint64_t eager_evaluations = 0;
    std::uint64_t lazy_evaluations = 0;
    bool identical_selections = true;  // across reps and eager vs lazy
    std::vector<std::size_t> selected;
};

BenchReport run_bench(const BenchParams& params);
std::string format_bench_report(const BenchReport& report);

}  // namespace mmcov
