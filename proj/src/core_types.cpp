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

#include "mmcov/core_types.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace mmcov {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::kInvalidArgument: return "InvalidArgument";
        case ErrorCode::kDegenerateRow: return "DegenerateRow";
        case ErrorCode::kDimMismatch: return "DimMismatch";
        case ErrorCode::kNonPositiveTau: return "NonPositiveTau";
        case ErrorCode::kBadSpans: return "BadSpans";
        case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::kSourceCountMismatch: return "SourceCountMismatch";
        case ErrorCode::kInstanceTooLarge: return "InstanceTooLarge";
        case ErrorCode::kBudgetExceedsTokens: return "BudgetExceedsTokens";
        case ErrorCode::kZeroBaseline: return "ZeroBaseline";
        case ErrorCode::kBadMagic: return "BadMagic";
        case ErrorCode::kBadVersion: return "BadVersion";
        case ErrorCode::kTruncatedFile: return "TruncatedFile";
        case ErrorCode::kInvariantViolation: return "InvariantViolation";
        case ErrorCode::kIo: return "IoError";
    }
    return "Unknown";
}

std::string_view role_name(TokenRole role) noexcept {
    switch (role) {
        case TokenRole::kTextQuery: return "text";
        case TokenRole::kVisionPre: return "vision_pre";
        case TokenRole::kVisionPost: return "vision_post";
        case TokenRole::kAgentText: return "agent_text";
    }
    return "unknown";
}

TokenMatrix::TokenMatrix(std::size_t rows, std::size_t dim, TokenRole role)
    : TokenMatrix(rows, dim, role, std::vector<float>(rows * dim, 0.0f)) {}

TokenMatrix::TokenMatrix(std::size_t rows, std::size_t dim, TokenRole role, std::vector<float> data)
    : rows_(rows), dim_(dim), role_(role), data_(std::move(data)) {
    if (dim_ == 0) {
        throw Error(ErrorCode::kInvalidArgument, "token matrix dim must be >= 1");
    }
    if (data_.size() != rows_ * dim_) {
        throw Error(ErrorCode::kInvalidArgument,
                    "token matrix data length " + std::to_string(data_.size()) + " != " +
                        std::to_string(rows_) + "x" + std::to_string(dim_));
    }
}

TokenMatrix TokenMatrix::with_role(TokenRole role) const {
    return TokenMatrix(rows_, dim_, role, data_);
}

double dot(std::span<const float> a, std::span<const float> b) noexcept {
    double acc = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        acc += static_cast<double>(a[d]) * static_cast<double>(b[d]);
    }
    return acc;
}

double l2_norm(std::span<const float> a) noexcept { return std::sqrt(dot(a, a)); }

TokenMatrix normalize(const TokenMatrix& matrix, double epsilon) {
    if (!(epsilon > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "normalize epsilon must be > 0");
    }
    TokenMatrix out = matrix;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.mutable_row(i);
        const double norm = l2_norm(row);
        if (!(norm >= epsilon)) {
            throw DegenerateRowError(i);
        }
        for (float& x : row) {
            x = static_cast<float>(static_cast<double>(x) / norm);
        }
    }
    return out;
}

std::string_view kind_name(SimilarityKind kind) noexcept {
    switch (kind) {
        case SimilarityKind::kRawTV: return "raw_tv";
        case SimilarityKind::kRawVV: return "raw_vv";
        case SimilarityKind::kCalibratedTV: return "calibrated_tv";
        case SimilarityKind::kCalibratedVV: return "calibrated_vv";
    }
    return "unknown";
}

bool is_calibrated(SimilarityKind kind) noexcept {
    return kind == SimilarityKind::kCalibratedTV || kind == SimilarityKind::kCalibratedVV;
}

SimilarityMatrix::SimilarityMatrix(std::size_t targets, std::size_t sources, SimilarityKind kind,
                                   std::optional<double> temperature)
    : SimilarityMatrix(targets, sources, kind, std::vector<double>(targets * sources, 0.0),
                       temperature) {}

SimilarityMatrix::SimilarityMatrix(std::size_t targets, std::size_t sources, SimilarityKind kind,
                                   std::vector<double> data, std::optional<double> temperature)
    : targets_(targets),
      sources_(sources),
      kind_(kind),
      temperature_(temperature),
      data_(std::move(data)) {
    if (data_.size() != targets_ * sources_) {
        throw Error(ErrorCode::kInvalidArgument, "similarity data length does not match shape");
    }
    if (is_calibrated(kind_) != temperature_.has_value()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "temperature must be set exactly for calibrated matrices");
    }
}

SimilarityMatrix SimilarityMatrix::relabel(SimilarityKind kind,
                                           std::optional<double> temperature) const {
    return SimilarityMatrix(targets_, sources_, kind, data_, temperature);
}

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

}  // namespace

void CoverageConfig::validate() const {
    require(tau_t > 0.0 && std::isfinite(tau_t), "tau_t must be > 0");
    require(tau_v > 0.0 && std::isfinite(tau_v), "tau_v must be > 0");
    require(alpha >= 0.0 && std::isfinite(alpha), "alpha must be >= 0");
    if (max_tokens) require(*max_tokens >= budget, "budget exceeds max_tokens");
    if (const auto* grid = std::get_if<AdaptiveGridKth>(&adaptive)) {
        require(grid->k >= 2, "grid k must be >= 2");
        require(!grid->grid.empty(), "temperature grid must be non-empty");
        for (std::size_t i = 0; i < grid->grid.size(); ++i) {
            require(grid->grid[i] > 0.0, "grid temperatures must be > 0");
            if (i > 0) require(grid->grid[i] > grid->grid[i - 1], "grid must be strictly increasing");
        }
    }
    if (const auto* bis = std::get_if<AdaptiveBisection>(&adaptive)) {
        require(bis->tol > 0.0, "bisection tol must be > 0");
        const double lo = bis->lo.value_or(tau_t);
        const double hi = bis->hi.value_or(tau_v);
        require(lo > 0.0 && lo < hi, "bisection interval must satisfy 0 < lo < hi");
    }
}

CoverageConfig CoverageConfig::qwen_profile() {
    CoverageConfig config;
    config.tau_t = 0.01;
    return config;
}

}  // namespace mmcov
