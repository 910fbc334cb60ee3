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

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mmcov/coverage.hpp"
#include "mmcov/similarity.hpp"
#include "oracles.hpp"

using namespace mmcov;

namespace {

TokenMatrix basis_rows(std::initializer_list<std::size_t> axes, std::size_t dim, TokenRole role) {
    std::vector<float> data;
    for (std::size_t a : axes) {
        for (std::size_t d = 0; d < dim; ++d) data.push_back(d == a ? 1.0f : 0.0f);
    }
    return TokenMatrix(axes.size(), dim, role, std::move(data));
}

std::size_t argmax(std::span<const double> row) {
    return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

TEST_CASE("build_tv: identical rows give 1, orthogonal rows give 0") {
    const TokenMatrix text = basis_rows({0, 1}, 4, TokenRole::kTextQuery);
    const TokenMatrix vision = basis_rows({1, 2, 0}, 4, TokenRole::kVisionPost);
    const SimilarityMatrix m = build_tv(text, vision);
    CHECK(m.kind() == SimilarityKind::kRawTV);
    CHECK(m(0, 2) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(m(1, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(m(0, 1)) <= 1e-6);
    CHECK(std::abs(m(1, 2)) <= 1e-6);
}

TEST_CASE("build_tv matches the per-entry dot-product oracle exactly") {
    const TokenMatrix text = oracle::random_unit(3, 8, 11, TokenRole::kTextQuery);
    const TokenMatrix vision = oracle::random_unit(5, 8, 12);
    const auto expected = oracle::inner_products(text, vision);
    for (std::size_t threads : {1, 3}) {
        const SimilarityMatrix m = build_tv(text, vision, threads);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 5; ++j) CHECK(m(i, j) == expected[i][j]);
    }
    // Wider than one tile, odd width.
    const TokenMatrix wide_text = oracle::random_unit(7, 33, 13);
    const TokenMatrix wide_vision = oracle::random_unit(21, 33, 14);
    const auto wide = oracle::inner_products(wide_text, wide_vision);
    const SimilarityMatrix w = build_tv(wide_text, wide_vision, 2);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 21; ++j) CHECK(w(i, j) == wide[i][j]);
}

TEST_CASE("build_tv rejects mismatched dims") {
    CHECK_THROWS_AS(build_tv(oracle::random_unit(2, 4, 1), oracle::random_unit(2, 5, 2)), Error);
    try {
        build_tv(oracle::random_unit(2, 4, 1), oracle::random_unit(2, 5, 2));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kDimMismatch);
    }
}

TEST_CASE("build_vv is symmetric with unit diagonal and matches the naive double loop") {
    const TokenMatrix pre = oracle::random_unit(6, 4, 21, TokenRole::kVisionPre);
    const SimilarityMatrix m = build_vv(pre);
    const auto expected = oracle::inner_products(pre, pre);
    CHECK(m.kind() == SimilarityKind::kRawVV);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(m(i, i) == doctest::Approx(1.0).epsilon(1e-6));
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(m(i, j) == m(j, i));
            CHECK(m(i, j) == expected[i][j]);
        }
    }
    const TokenMatrix big = oracle::random_unit(19, 10, 22, TokenRole::kVisionPre);
    const SimilarityMatrix b = build_vv(big, 4);
    const auto big_expected = oracle::inner_products(big, big);
    for (std::size_t i = 0; i < 19; ++i)
        for (std::size_t j = 0; j < 19; ++j) CHECK(b(i, j) == big_expected[i][j]);
}

TEST_CASE("calibrate: uniform and analytic rows") {
    const auto uniform = oracle::from_rows({{0.3, 0.3, 0.3}}, SimilarityKind::kRawTV);
    for (double tau : {0.01, 0.2, 3.0}) {
        const auto c = calibrate(uniform, tau);
        for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(c(0, j) - 1.0 / 3.0) <= 1e-9);
    }
    const auto two = oracle::from_rows({{std::numbers::ln2, 0.0}}, SimilarityKind::kRawVV);
    const auto c = calibrate(two, 1.0);
    CHECK(c.kind() == SimilarityKind::kCalibratedVV);
    CHECK(c.temperature() == 1.0);
    CHECK(std::abs(c(0, 0) - 2.0 / 3.0) <= 1e-9);
    CHECK(std::abs(c(0, 1) - 1.0 / 3.0) <= 1e-9);
}

TEST_CASE("calibrate matches the naive softmax at tau 0.02") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    oracle::Matrix raw(4, std::vector<double>(7));
    for (auto& row : raw)
        for (double& x : row) x = u(rng);
    const auto c = calibrate(oracle::from_rows(raw, SimilarityKind::kRawTV), 0.02);
    const auto expected = oracle::softmax(raw, 0.02);
    for (std::size_t i = 0; i < 4; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 7; ++j) {
            CHECK(std::abs(c(i, j) - expected[i][j]) <= 1e-9);
            sum += c(i, j);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
}

TEST_CASE("calibrate errors") {
    const auto raw = oracle::from_rows({{0.1, 0.2}}, SimilarityKind::kRawTV);
    CHECK_THROWS_AS(calibrate(raw, 0.0), Error);
    CHECK_THROWS_AS(calibrate(raw, -1.0), Error);
    try {
        calibrate(raw, 0.0);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kNonPositiveTau);
    }
    CHECK_THROWS_AS(calibrate(calibrate(raw, 0.1), 0.1), Error);
}

TEST_CASE("calibrate preserves argmax and sharpens as tau shrinks") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::size_t sharp_rows = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> row(9);
        for (double& x : row) x = u(rng);
        const auto raw = oracle::from_rows({row}, SimilarityKind::kRawTV);
        const std::size_t top = argmax(raw.row(0));
        CHECK(argmax(calibrate(raw, 0.02).row(0)) == top);
        CHECK(argmax(calibrate(raw, 0.7).row(0)) == top);
        auto sorted = row;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        if (sorted[0] - sorted[1] >= 0.01) {
            ++sharp_rows;
            CHECK(calibrate(raw, 1e-4)(0, top) >= 0.999);
        }
    }
    CHECK(sharp_rows > 100);
}

TEST_CASE("concat_agent keeps query rows first") {
    const TokenMatrix text = oracle::random_unit(2, 4, 51, TokenRole::kTextQuery);
    const TokenMatrix agent = oracle::random_unit(3, 4, 52, TokenRole::kAgentText);
    const TokenMatrix joined = concat_agent(text, agent);
    REQUIRE(joined.rows() == 5);
    CHECK(std::ranges::equal(joined.row(2), agent.row(0)));
    CHECK(std::ranges::equal(joined.row(1), text.row(1)));
    CHECK(concat_agent(text, TokenMatrix(0, 4, TokenRole::kAgentText)) == text);
    CHECK_THROWS_AS(concat_agent(text, oracle::random_unit(1, 5, 53)), Error);
}

TEST_CASE("agent rows pull their column into the selection") {
    // Two query rows on axes 0 and 1, two agent rows on axis 4; six vision
    // tokens on the axes. Without agent text greedy covers 0, 1 and then
    // breaks the tie at 2; with it, token 4 covers half the targets.
    const TokenMatrix vision = basis_rows({0, 1, 2, 3, 4, 5}, 6, TokenRole::kVisionPost);
    const TokenMatrix text = basis_rows({0, 1}, 6, TokenRole::kTextQuery);
    const TokenMatrix agent = basis_rows({4, 4}, 6, TokenRole::kAgentText);

    const auto plain = calibrate(build_tv(text, vision), 0.02);
    const auto enriched = calibrate(build_tv(concat_agent(text, agent), vision), 0.02);
    REQUIRE(enriched.targets() == 4);

    const auto plain_rows = oracle::softmax(oracle::inner_products(text, vision), 0.02);
    const auto rich_rows =
        oracle::softmax(oracle::inner_products(concat_agent(text, agent), vision), 0.02);
    const auto trace_plain = oracle::greedy_from_scratch(
        [&](const auto& s) { return oracle::coverage(s, plain_rows); }, 6, 3);
    const auto trace_rich = oracle::greedy_from_scratch(
        [&](const auto& s) { return oracle::coverage(s, rich_rows); }, 6, 3);
    CHECK(trace_plain == std::vector<std::size_t>{0, 1, 2});
    CHECK(trace_rich.front() == 4);

    CHECK(greedy_select(plain, 3).selected == trace_plain);
    CHECK(greedy_select(enriched, 3).selected == trace_rich);
}

TEST_CASE("word spans validation") {
    CHECK_NOTHROW(WordSpans({{0, 2}, {2, 3}}).validate(3));
    CHECK_THROWS_AS(WordSpans({{0, 2}, {3, 4}}).validate(4), Error);
    CHECK_THROWS_AS(WordSpans({{0, 2}}).validate(3), Error);
    CHECK_THROWS_AS(WordSpans({{0, 0}, {0, 2}}).validate(2), Error);
    CHECK_THROWS_AS(WordSpans({{1, 2}}).validate(2), Error);
    CHECK_NOTHROW(WordSpans().validate(0));
}

TEST_CASE("pool_pre") {
    const TokenMatrix text = oracle::random_unit(4, 5, 61, TokenRole::kTextQuery);
    const WordSpans singles = WordSpans::singletons(4);
    for (auto method : {PoolMethod::kMean, PoolMethod::kMax, PoolMethod::kFirst}) {
        const TokenMatrix pooled = pool_pre(text, singles, method);
        for (std::size_t k = 0; k < text.data().size(); ++k) {
            CHECK(std::abs(pooled.data()[k] - text.data()[k]) <= 1e-7);
        }
    }

    const TokenMatrix twin(2, 3, TokenRole::kTextQuery, {0.6f, 0.8f, 0.0f, 0.6f, 0.8f, 0.0f});
    const TokenMatrix mean = pool_pre(twin, WordSpans({{0, 2}}), PoolMethod::kMean);
    CHECK(mean.row(0)[0] == doctest::Approx(0.6).epsilon(1e-7));
    CHECK(mean.row(0)[1] == doctest::Approx(0.8).epsilon(1e-7));

    const TokenMatrix axes(2, 2, TokenRole::kTextQuery, {1, 0, 0, 1});
    const TokenMatrix max = pool_pre(axes, WordSpans({{0, 2}}), PoolMethod::kMax);
    CHECK(max.row(0)[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
    CHECK(max.row(0)[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));

    const TokenMatrix peaked(2, 2, TokenRole::kTextQuery, {0.6f, 0.8f, 1.0f, 0.0f});
    const TokenMatrix peak =
        pool_pre(peaked, WordSpans({{0, 2}}), PoolMethod::kMax, PoolMaxRule::kPeakRow);
    CHECK(std::ranges::equal(peak.row(0), peaked.row(1)));

    CHECK_THROWS_AS(pool_pre(text, WordSpans({{0, 3}}), PoolMethod::kMean), Error);
}

TEST_CASE("pool_post") {
    const TokenMatrix text = oracle::random_unit(5, 6, 71, TokenRole::kTextQuery);
    const TokenMatrix vision = oracle::random_unit(7, 6, 72);
    const SimilarityMatrix m = build_tv(text, vision);
    CHECK(pool_post(m, WordSpans::singletons(5), PoolMethod::kMean) == m);
    CHECK(pool_post(m, WordSpans::singletons(5), PoolMethod::kMax) == m);

    const WordSpans spans({{0, 2}, {2, 3}, {3, 5}});
    const SimilarityMatrix mean = pool_post(m, spans, PoolMethod::kMean);
    REQUIRE(mean.targets() == 3);
    const auto rows = oracle::to_rows(m);
    for (std::size_t j = 0; j < 7; ++j) {
        CHECK(std::abs(mean(0, j) - (rows[0][j] + rows[1][j]) / 2.0) <= 1e-9);
        CHECK(std::abs(mean(2, j) - (rows[3][j] + rows[4][j]) / 2.0) <= 1e-9);
        CHECK(pool_post(m, spans, PoolMethod::kMax)(0, j) == std::max(rows[0][j], rows[1][j]));
    }

    // First pooling commutes with the inner product, bit for bit.
    const SimilarityMatrix post_first = pool_post(m, spans, PoolMethod::kFirst);
    const SimilarityMatrix pre_first = build_tv(pool_pre(text, spans, PoolMethod::kFirst), vision);
    CHECK(post_first == pre_first);
}

TEST_CASE("mean_kth_largest skips a dominant diagonal at k = 2") {
    const TokenMatrix pre = oracle::random_unit(8, 6, 81, TokenRole::kVisionPre);
    const SimilarityMatrix cal = calibrate(build_vv(pre), 0.1);
    const auto rows = oracle::to_rows(cal);
    for (std::size_t i = 0; i < 8; ++i) REQUIRE(argmax(cal.row(i)) == i);
    CHECK(mean_kth_largest(cal, 2) == doctest::Approx(oracle::mean_kth(rows, 2)).epsilon(1e-12));
    double off_diag_max = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
        double best = 0.0;
        for (std::size_t j = 0; j < 8; ++j)
            if (j != i) best = std::max(best, rows[i][j]);
        off_diag_max += best / 8.0;
    }
    CHECK(mean_kth_largest(cal, 2) == doctest::Approx(off_diag_max).epsilon(1e-12));
    CHECK(mean_kth_largest(cal, 1) == doctest::Approx(oracle::row_max_mean(rows)).epsilon(1e-12));
}

namespace {

struct TauFixture {
    SimilarityMatrix vv_raw;
    SimilarityMatrix tv_cal;
};

// tv_cal is chosen so the gap vanishes exactly at `crossing`.
TauFixture crossing_fixture(std::uint64_t seed, double crossing) {
    const TokenMatrix pre = oracle::random_unit(10, 8, seed, TokenRole::kVisionPre);
    SimilarityMatrix vv = build_vv(pre);
    SimilarityMatrix tv = calibrate(vv, crossing).relabel(SimilarityKind::kCalibratedTV, crossing);
    return {std::move(vv), std::move(tv)};
}

}  // namespace

TEST_CASE("bisection returns hi when the gap vanishes there") {
    const auto fx = crossing_fixture(91, 0.2);
    const TauSearch r = adapt_tau_bisection(fx.tv_cal, fx.vv_raw, 0.02, 0.2, 1e-4);
    CHECK(std::abs(r.tau - 0.2) <= 1e-4);
    CHECK(r.bracketed);
}

TEST_CASE("bisection agrees with a dense scan and respects the iteration bound") {
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
        const double crossing = 0.03 + 0.03 * static_cast<double>(seed - 100);
        const auto fx = crossing_fixture(seed, crossing);
        const TauSearch r = adapt_tau_bisection(fx.tv_cal, fx.vv_raw, 0.02, 0.2, 1e-4);
        CHECK(r.bracketed);
        CHECK(r.monotone);
        CHECK(r.iterations <= 11);

        const auto raw = oracle::to_rows(fx.vv_raw);
        const double target = oracle::row_max_mean(oracle::to_rows(fx.tv_cal));
        double best_tau = 0.0;
        double best_gap = std::numeric_limits<double>::infinity();
        for (int p = 0; p < 10000; ++p) {
            const double tau = 0.02 + (0.2 - 0.02) * p / 9999.0;
            const double gap = std::abs(target - oracle::row_max_mean(oracle::softmax(raw, tau)));
            if (gap < best_gap) {
                best_gap = gap;
                best_tau = tau;
            }
        }
        CHECK(std::abs(r.tau - best_tau) <= 1e-4);
    }
}

TEST_CASE("bisection without a sign change returns the closer endpoint") {
    const auto fx = crossing_fixture(111, 0.01);  // crossing below the interval
    const TauSearch r = adapt_tau_bisection(fx.tv_cal, fx.vv_raw, 0.02, 0.2, 1e-4);
    CHECK_FALSE(r.bracketed);
    CHECK(r.tau == 0.02);
    CHECK_THROWS_AS(adapt_tau_bisection(fx.tv_cal, fx.vv_raw, 0.2, 0.02, 1e-4), Error);
    CHECK_THROWS_AS(adapt_tau_bisection(fx.vv_raw, fx.vv_raw, 0.02, 0.2, 1e-4), Error);
}

TEST_CASE("grid search matches exhaustive evaluation of the grid") {
    const std::vector<double> grid = {0.05, 0.1, 0.15, 0.2};
    for (std::uint64_t seed = 200; seed < 210; ++seed) {
        const TokenMatrix pre = oracle::random_unit(8, 8, seed, TokenRole::kVisionPre);
        const TokenMatrix text = oracle::random_unit(8, 8, seed + 1000, TokenRole::kTextQuery);
        const TokenMatrix post = oracle::random_unit(8, 8, seed + 2000);
        const SimilarityMatrix vv = build_vv(pre);
        const SimilarityMatrix tv = calibrate(build_tv(text, post), 0.02);
        const TauSearch r = adapt_tau_grid_kth(tv, vv, 2, grid);

        const double target = oracle::row_max_mean(oracle::to_rows(tv));
        const auto raw = oracle::to_rows(vv);
        double expected = grid[0];
        double best = std::numeric_limits<double>::infinity();
        for (double tau : grid) {
            const double gap = std::abs(target - oracle::mean_kth(oracle::softmax(raw, tau), 2));
            if (gap < best) {
                best = gap;
                expected = tau;
            }
        }
        CHECK(r.tau == expected);
        CHECK(std::find(grid.begin(), grid.end(), r.tau) != grid.end());
    }
}

TEST_CASE("grid search with one candidate returns it") {
    const TokenMatrix pre = oracle::random_unit(5, 4, 301, TokenRole::kVisionPre);
    const TokenMatrix text = oracle::random_unit(3, 4, 302, TokenRole::kTextQuery);
    const SimilarityMatrix tv = calibrate(build_tv(text, oracle::random_unit(5, 4, 303)), 0.02);
    const std::vector<double> one = {0.13};
    CHECK(adapt_tau_grid_kth(tv, build_vv(pre), 2, one).tau == 0.13);
    CHECK_THROWS_AS(adapt_tau_grid_kth(tv, build_vv(pre), 2, {}), Error);
}
