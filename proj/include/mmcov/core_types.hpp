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

// Shared value types for vision-token coverage selection.
//
// Embeddings are stored as f32; every reduction (dot products, row sums,
// coverage values) accumulates in double, strictly left to right, so results
// do not depend on how work is split across threads.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "mmcov/error.hpp"

namespace mmcov {

enum class TokenRole { kTextQuery, kVisionPre, kVisionPost, kAgentText };

std::string_view role_name(TokenRole role) noexcept;

/// Dense row-major matrix of token embeddings.
class TokenMatrix {
public:
    TokenMatrix(std::size_t rows, std::size_t dim, TokenRole role);
    TokenMatrix(std::size_t rows, std::size_t dim, TokenRole role, std::vector<float> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t dim() const noexcept { return dim_; }
    TokenRole role() const noexcept { return role_; }

    std::span<const float> data() const noexcept { return data_; }
    std::span<float> mutable_data() noexcept { return data_; }

    std::span<const float> row(std::size_t i) const noexcept {
        return {data_.data() + i * dim_, dim_};
    }
    std::span<float> mutable_row(std::size_t i) noexcept { return {data_.data() + i * dim_, dim_}; }

    /// Same data with a different role tag.
    TokenMatrix with_role(TokenRole role) const;

    friend bool operator==(const TokenMatrix&, const TokenMatrix&) = default;

private:
    std::size_t rows_;
    std::size_t dim_;
    TokenRole role_;
    std::vector<float> data_;
};

inline constexpr double kDefaultDegenerateEpsilon = 1e-8;

/// Scales every row to unit L2 norm. Throws DegenerateRowError for a row with
/// norm below `epsilon`.
TokenMatrix normalize(const TokenMatrix& matrix, double epsilon = kDefaultDegenerateEpsilon);

/// Left-to-right double-accumulated inner product.
double dot(std::span<const float> a, std::span<const float> b) noexcept;

/// Left-to-right double-accumulated L2 norm.
double l2_norm(std::span<const float> a) noexcept;

enum class SimilarityKind { kRawTV, kRawVV, kCalibratedTV, kCalibratedVV };

std::string_view kind_name(SimilarityKind kind) noexcept;
bool is_calibrated(SimilarityKind kind) noexcept;

/// targets x sources score matrix, row-major, double precision.
class SimilarityMatrix {
public:
    SimilarityMatrix(std::size_t targets, std::size_t sources, SimilarityKind kind,
                     std::optional<double> temperature = std::nullopt);
    SimilarityMatrix(std::size_t targets, std::size_t sources, SimilarityKind kind,
                     std::vector<double> data, std::optional<double> temperature = std::nullopt);

    std::size_t targets() const noexcept { return targets_; }
    std::size_t sources() const noexcept { return sources_; }
    SimilarityKind kind() const noexcept { return kind_; }
    std::optional<double> temperature() const noexcept { return temperature_; }

    double operator()(std::size_t target, std::size_t source) const noexcept {
        return data_[target * sources_ + source];
    }
    double& at(std::size_t target, std::size_t source) noexcept {
        return data_[target * sources_ + source];
    }

    std::span<const double> data() const noexcept { return data_; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * sources_, sources_};
    }
    std::span<double> mutable_row(std::size_t i) noexcept {
        return {data_.data() + i * sources_, sources_};
    }

    /// Same entries relabelled; used for tests and for oracles that feed a
    /// calibrated matrix through an API expecting another kind.
    SimilarityMatrix relabel(SimilarityKind kind, std::optional<double> temperature) const;

    friend bool operator==(const SimilarityMatrix&, const SimilarityMatrix&) = default;

private:
    std::size_t targets_;
    std::size_t sources_;
    SimilarityKind kind_;
    std::optional<double> temperature_;
    std::vector<double> data_;
};

enum class CoverageMode { kTextVisionOnly, kVisionVisionOnly, kMultimodal };

enum class Pooling { kNone, kPreMean, kPreMax, kPreFirst, kPostMean, kPostMax, kPostFirst };

/// How pre-projection Max pooling picks its vector.
enum class PoolMaxRule {
    kElementWise,  // element-wise max over the span, then renormalize
    kPeakRow,      // the span row holding the single largest feature value
};

struct AdaptiveOff {};

struct AdaptiveBisection {
    // Search interval; unset bounds default to (tau_t, tau_v].
    std::optional<double> lo;
    std::optional<double> hi;
    double tol = 1e-4;
};

struct AdaptiveGridKth {
    std::size_t k = 2;
    std::vector<double> grid = {0.05, 0.1, 0.15, 0.2};
};

using AdaptiveTau = std::variant<AdaptiveOff, AdaptiveBisection, AdaptiveGridKth>;

struct CoverageConfig {
    double tau_t = 0.02;
    double tau_v = 0.2;
    double alpha = 0.5;
    std::size_t budget = 0;
    // Token count the budget refers to when splitting across crops;
    // unset means the sample's vision token count.
    std::optional<std::size_t> max_tokens;
    CoverageMode mode = CoverageMode::kMultimodal;
    AdaptiveTau adaptive = AdaptiveOff{};
    Pooling pooling = Pooling::kNone;
    PoolMaxRule pool_max_rule = PoolMaxRule::kElementWise;
    bool global_across_crops = false;
    bool lazy = true;

    /// Throws Error(kInvalidArgument) when an invariant does not hold.
    void validate() const;

    /// Settings used for Qwen-style models (tau_t = 0.01).
    static CoverageConfig qwen_profile();
};

struct SelectionResult {
    std::vector<std::size_t> selected;
    std::vector<double> gains;
    double objective_tv = 0.0;
    double objective_vv = 0.0;
    double objective_fused = 0.0;
    double effective_tau_v = 0.0;
    // Gain evaluations performed by the greedy loop(s).
    std::uint64_t gain_evaluations = 0;
    // Per-crop split of `selected`/`gains`; a single entry for global runs.
    std::vector<std::size_t> segments;
    std::vector<double> segment_tau_v;
};

}  // namespace mmcov
