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

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "mmcov/core_types.hpp"

namespace mmcov {

/// Half-open [start, end) ranges of text-token rows forming words.
class WordSpans {
public:
    WordSpans() = default;
    explicit WordSpans(std::vector<std::pair<std::size_t, std::size_t>> spans)
        : spans_(std::move(spans)) {}

    /// Every row of a `rows`-row matrix in its own span.
    static WordSpans singletons(std::size_t rows);

    const std::vector<std::pair<std::size_t, std::size_t>>& spans() const noexcept { return spans_; }
    std::size_t size() const noexcept { return spans_.size(); }

    /// Throws Error(kBadSpans) unless the spans are sorted, non-empty,
    /// contiguous and exactly cover [0, rows).
    void validate(std::size_t rows) const;

    friend bool operator==(const WordSpans&, const WordSpans&) = default;

private:
    std::vector<std::pair<std::size_t, std::size_t>> spans_;
};

enum class PoolMethod { kMean, kMax, kFirst };

/// M[i][j] = <text_i, vision_j>. Inputs are expected to be unit-normalized.
SimilarityMatrix build_tv(const TokenMatrix& text, const TokenMatrix& vision_post,
                          std::size_t threads = 1);

/// Symmetric n x n Gram matrix of the pre-projection vision rows.
SimilarityMatrix build_vv(const TokenMatrix& vision_pre, std::size_t threads = 1);

/// Row-wise softmax at temperature `tau` with max subtraction.
SimilarityMatrix calibrate(const SimilarityMatrix& raw, double tau);

/// Query rows followed by agent rows.
TokenMatrix concat_agent(const TokenMatrix& text, const TokenMatrix& agent);

TokenMatrix pool_pre(const TokenMatrix& text, const WordSpans& spans, PoolMethod method,
                     PoolMaxRule max_rule = PoolMaxRule::kElementWise);

SimilarityMatrix pool_post(const SimilarityMatrix& m, const WordSpans& spans, PoolMethod method);

/// Mean over rows of the k-th largest entry (k = 1 is the plain row max).
double mean_kth_largest(const SimilarityMatrix& m, std::size_t k);

struct TauSearch {
    double tau = 0.0;
    double gap = 0.0;  // f_tv - f_vv(tau)
    std::size_t iterations = 0;
    bool bracketed = true;  // false: no sign change, best endpoint returned
    bool monotone = true;   // false: a probe broke monotonicity of f_vv(tau)
};

/// Solves min |f(N; tv_cal) - f(N; calibrate(vv_raw, tau))| on [lo, hi] by
/// bisection on the sign of the gap.
TauSearch adapt_tau_bisection(const SimilarityMatrix& tv_cal, const SimilarityMatrix& vv_raw,
                              double lo, double hi, double tol);

/// Picks the grid temperature minimizing |f(N; tv_cal) - f_k(N; calibrate(vv_raw, tau))|,
/// ties toward the smaller temperature.
TauSearch adapt_tau_grid_kth(const SimilarityMatrix& tv_cal, const SimilarityMatrix& vv_raw,
                             std::size_t k, std::span<const double> grid);

}  // namespace mmcov
