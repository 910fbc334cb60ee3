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

#include "mmcov/similarity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "mmcov/coverage.hpp"
#include "parallel.hpp"

namespace mmcov {

namespace {

constexpr std::size_t kTile = 8;

// Sources re-laid out as [tile][dim][kTile], zero padded, so the inner loop
// advances kTile independent accumulators per feature. Each accumulator still
// sums its own dot product strictly in feature order.
std::vector<float> tile_sources(const TokenMatrix& sources) {
    const std::size_t tiles = (sources.rows() + kTile - 1) / kTile;
    const std::size_t dim = sources.dim();
    std::vector<float> out(tiles * dim * kTile, 0.0f);
    for (std::size_t j = 0; j < sources.rows(); ++j) {
        const auto row = sources.row(j);
        float* base = out.data() + (j / kTile) * dim * kTile + (j % kTile);
        for (std::size_t d = 0; d < dim; ++d) base[d * kTile] = row[d];
    }
    return out;
}

void dot_tile(const float* target, const float* tile, std::size_t dim,
              std::array<double, kTile>& acc) {
    acc.fill(0.0);
    for (std::size_t d = 0; d < dim; ++d) {
        const double t = static_cast<double>(target[d]);
        const float* col = tile + d * kTile;
        for (std::size_t j = 0; j < kTile; ++j) {
            acc[j] += t * static_cast<double>(col[j]);
        }
    }
}

// first_tile(i) lets the symmetric case skip tiles entirely below the diagonal.
template <typename FirstTile>
void gram(const TokenMatrix& targets, const TokenMatrix& sources, SimilarityMatrix& out,
          std::size_t threads, FirstTile first_tile) {
    const std::size_t dim = sources.dim();
    const std::size_t n = sources.rows();
    const std::size_t tiles = (n + kTile - 1) / kTile;
    const std::vector<float> tiled = tile_sources(sources);
    detail::parallel_rows(targets.rows(), threads, [&](std::size_t begin, std::size_t end) {
        std::array<double, kTile> acc{};
        for (std::size_t i = begin; i < end; ++i) {
            const float* target = targets.row(i).data();
            auto row = out.mutable_row(i);
            for (std::size_t t = first_tile(i); t < tiles; ++t) {
                dot_tile(target, tiled.data() + t * dim * kTile, dim, acc);
                const std::size_t j0 = t * kTile;
                const std::size_t width = std::min(kTile, n - j0);
                for (std::size_t j = 0; j < width; ++j) row[j0 + j] = acc[j];
            }
        }
    });
}

}  // namespace

SimilarityMatrix build_tv(const TokenMatrix& text, const TokenMatrix& vision_post,
                          std::size_t threads) {
    if (text.dim() != vision_post.dim()) {
        throw Error(ErrorCode::kDimMismatch, "text dim " + std::to_string(text.dim()) +
                                                 " != vision_post dim " +
                                                 std::to_string(vision_post.dim()));
    }
    SimilarityMatrix out(text.rows(), vision_post.rows(), SimilarityKind::kRawTV);
    gram(text, vision_post, out, threads, [](std::size_t) { return std::size_t{0}; });
    return out;
}

SimilarityMatrix build_vv(const TokenMatrix& vision_pre, std::size_t threads) {
    const std::size_t n = vision_pre.rows();
    SimilarityMatrix out(n, n, SimilarityKind::kRawVV);
    gram(vision_pre, vision_pre, out, threads, [](std::size_t i) { return i / kTile; });
    // Products commute exactly, so mirroring gives the same bits a direct
    // evaluation of the lower triangle would.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) out.at(i, j) = out(j, i);
    }
    return out;
}

SimilarityMatrix calibrate(const SimilarityMatrix& raw, double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw Error(ErrorCode::kNonPositiveTau, "temperature must be > 0, got " + std::to_string(tau));
    }
    SimilarityKind kind;
    switch (raw.kind()) {
        case SimilarityKind::kRawTV: kind = SimilarityKind::kCalibratedTV; break;
        case SimilarityKind::kRawVV: kind = SimilarityKind::kCalibratedVV; break;
        default:
            throw Error(ErrorCode::kInvalidArgument, "matrix is already calibrated");
    }
    SimilarityMatrix out(raw.targets(), raw.sources(), kind, tau);
    for (std::size_t i = 0; i < raw.targets(); ++i) {
        const auto in = raw.row(i);
        auto row = out.mutable_row(i);
        if (in.empty()) continue;
        const double peak = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            row[j] = std::exp((in[j] - peak) / tau);
            sum += row[j];
        }
        for (double& x : row) x /= sum;
    }
    return out;
}

TokenMatrix concat_agent(const TokenMatrix& text, const TokenMatrix& agent) {
    if (text.dim() != agent.dim()) {
        throw Error(ErrorCode::kDimMismatch, "agent dim " + std::to_string(agent.dim()) +
                                                 " != text dim " + std::to_string(text.dim()));
    }
    std::vector<float> data(text.data().begin(), text.data().end());
    data.insert(data.end(), agent.data().begin(), agent.data().end());
    return TokenMatrix(text.rows() + agent.rows(), text.dim(), text.role(), std::move(data));
}

WordSpans WordSpans::singletons(std::size_t rows) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    spans.reserve(rows);
    for (std::size_t i = 0; i < rows; ++i) spans.emplace_back(i, i + 1);
    return WordSpans(std::move(spans));
}

void WordSpans::validate(std::size_t rows) const {
    std::size_t expected = 0;
    for (std::size_t s = 0; s < spans_.size(); ++s) {
        const auto [start, end] = spans_[s];
        if (start != expected || end <= start) {
            throw Error(ErrorCode::kBadSpans, "span " + std::to_string(s) + " [" +
                                                  std::to_string(start) + ", " +
                                                  std::to_string(end) + ") breaks coverage at " +
                                                  std::to_string(expected));
        }
        expected = end;
    }
    if (expected != rows) {
        throw Error(ErrorCode::kBadSpans, "spans cover " + std::to_string(expected) + " of " +
                                              std::to_string(rows) + " rows");
    }
}

TokenMatrix pool_pre(const TokenMatrix& text, const WordSpans& spans, PoolMethod method,
                     PoolMaxRule max_rule) {
    spans.validate(text.rows());
    const std::size_t dim = text.dim();
    TokenMatrix out(spans.size(), dim, text.role());
    std::vector<double> pooled(dim);
    for (std::size_t s = 0; s < spans.size(); ++s) {
        const auto [start, end] = spans.spans()[s];
        auto dst = out.mutable_row(s);
        // A single row or the first row is copied verbatim; this keeps First
        // pooling bit-identical whether it happens before or after the product.
        if (method == PoolMethod::kFirst || end - start == 1) {
            std::ranges::copy(text.row(start), dst.begin());
            continue;
        }
        if (method == PoolMethod::kMax && max_rule == PoolMaxRule::kPeakRow) {
            std::size_t best_row = start;
            float best = -std::numeric_limits<float>::infinity();
            for (std::size_t r = start; r < end; ++r) {
                for (float x : text.row(r)) {
                    if (x > best) {
                        best = x;
                        best_row = r;
                    }
                }
            }
            std::ranges::copy(text.row(best_row), dst.begin());
            continue;
        }
        if (method == PoolMethod::kMean) {
            std::fill(pooled.begin(), pooled.end(), 0.0);
            for (std::size_t r = start; r < end; ++r) {
                const auto row = text.row(r);
                for (std::size_t d = 0; d < dim; ++d) pooled[d] += row[d];
            }
            const double count = static_cast<double>(end - start);
            for (double& x : pooled) x /= count;
        } else {
            for (std::size_t d = 0; d < dim; ++d) {
                double best = text.row(start)[d];
                for (std::size_t r = start + 1; r < end; ++r) {
                    best = std::max(best, static_cast<double>(text.row(r)[d]));
                }
                pooled[d] = best;
            }
        }
        double norm = 0.0;
        for (double x : pooled) norm += x * x;
        norm = std::sqrt(norm);
        if (!(norm >= kDefaultDegenerateEpsilon)) throw DegenerateRowError(s);
        for (std::size_t d = 0; d < dim; ++d) dst[d] = static_cast<float>(pooled[d] / norm);
    }
    return out;
}

SimilarityMatrix pool_post(const SimilarityMatrix& m, const WordSpans& spans, PoolMethod method) {
    spans.validate(m.targets());
    SimilarityMatrix out(spans.size(), m.sources(), m.kind(), m.temperature());
    for (std::size_t s = 0; s < spans.size(); ++s) {
        const auto [start, end] = spans.spans()[s];
        auto dst = out.mutable_row(s);
        std::ranges::copy(m.row(start), dst.begin());
        if (method == PoolMethod::kFirst) continue;
        for (std::size_t r = start + 1; r < end; ++r) {
            const auto src = m.row(r);
            for (std::size_t j = 0; j < dst.size(); ++j) {
                dst[j] = method == PoolMethod::kMax ? std::max(dst[j], src[j]) : dst[j] + src[j];
            }
        }
        if (method == PoolMethod::kMean) {
            const double count = static_cast<double>(end - start);
            for (double& x : dst) x /= count;
        }
    }
    return out;
}

double mean_kth_largest(const SimilarityMatrix& m, std::size_t k) {
    if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
    if (m.targets() == 0) return 0.0;
    std::vector<double> scratch;
    double sum = 0.0;
    for (std::size_t i = 0; i < m.targets(); ++i) {
        const auto row = m.row(i);
        if (row.empty()) continue;
        const std::size_t kk = std::min(k, row.size());
        scratch.assign(row.begin(), row.end());
        std::nth_element(scratch.begin(), scratch.begin() + (kk - 1), scratch.end(),
                         std::greater<>());
        sum += scratch[kk - 1];
    }
    return sum / static_cast<double>(m.targets());
}

namespace {

void require_kinds(const SimilarityMatrix& tv_cal, const SimilarityMatrix& vv_raw) {
    if (tv_cal.kind() != SimilarityKind::kCalibratedTV) {
        throw Error(ErrorCode::kInvalidArgument, "expected a calibrated text-vision matrix");
    }
    if (vv_raw.kind() != SimilarityKind::kRawVV) {
        throw Error(ErrorCode::kInvalidArgument, "expected a raw vision-vision matrix");
    }
}

}  // namespace

TauSearch adapt_tau_bisection(const SimilarityMatrix& tv_cal, const SimilarityMatrix& vv_raw,
                              double lo, double hi, double tol) {
    require_kinds(tv_cal, vv_raw);
    if (!(lo > 0.0 && lo < hi) || !(tol > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "bisection needs 0 < lo < hi and tol > 0");
    }
    const double target = full_coverage(tv_cal);
    auto f_vv = [&](double tau) { return full_coverage(calibrate(vv_raw, tau)); };

    // f_vv is non-increasing in tau, so the gap is non-decreasing.
    TauSearch result;
    double f_lo = f_vv(lo);
    double f_hi = f_vv(hi);
    double gap_lo = target - f_lo;
    double gap_hi = target - f_hi;
    result.monotone = f_lo >= f_hi;
    if (gap_lo == 0.0 || gap_hi == 0.0) {
        result.tau = gap_hi == 0.0 ? hi : lo;
        return result;
    }
    if ((gap_lo > 0.0) == (gap_hi > 0.0)) {
        result.bracketed = false;
        const bool take_lo = std::abs(gap_lo) < std::abs(gap_hi);
        result.tau = take_lo ? lo : hi;
        result.gap = take_lo ? gap_lo : gap_hi;
        return result;
    }
    while (hi - lo > tol) {
        const double mid = lo + (hi - lo) / 2.0;
        const double f_mid = f_vv(mid);
        ++result.iterations;
        if (f_mid > f_lo || f_mid < f_hi) result.monotone = false;
        const double gap_mid = target - f_mid;
        if (gap_mid == 0.0) {
            lo = hi = mid;
            break;
        }
        if ((gap_mid > 0.0) == (gap_lo > 0.0)) {
            lo = mid;
            f_lo = f_mid;
            gap_lo = gap_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    result.tau = lo + (hi - lo) / 2.0;
    result.gap = target - f_vv(result.tau);
    return result;
}

TauSearch adapt_tau_grid_kth(const SimilarityMatrix& tv_cal, const SimilarityMatrix& vv_raw,
                             std::size_t k, std::span<const double> grid) {
    require_kinds(tv_cal, vv_raw);
    if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, "temperature grid is empty");
    if (k < 2) throw Error(ErrorCode::kInvalidArgument, "k must be >= 2");
    const double target = full_coverage(tv_cal);
    TauSearch result;
    double best = std::numeric_limits<double>::infinity();
    for (double tau : grid) {
        const double gap = target - mean_kth_largest(calibrate(vv_raw, tau), k);
        ++result.iterations;
        if (std::abs(gap) < best) {
            best = std::abs(gap);
            result.tau = tau;
            result.gap = gap;
        }
    }
    return result;
}

}  // namespace mmcov
