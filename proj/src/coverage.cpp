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

#include "mmcov/coverage.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <random>
#include <string>

namespace mmcov {

namespace {

void check_indices(std::span<const std::size_t> selected, std::size_t sources) {
    for (std::size_t j : selected) {
        if (j >= sources) {
            throw Error(ErrorCode::kIndexOutOfRange, "source index " + std::to_string(j) +
                                                         " >= " + std::to_string(sources));
        }
    }
}

}  // namespace

double coverage_value(std::span<const std::size_t> selected, const SimilarityMatrix& m) {
    check_indices(selected, m.sources());
    if (selected.empty() || m.targets() == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < m.targets(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j : selected) best = std::max(best, m(i, j));
        sum += best;
    }
    return sum / static_cast<double>(m.targets());
}

double full_coverage(const SimilarityMatrix& m) {
    if (m.targets() == 0 || m.sources() == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < m.targets(); ++i) {
        const auto row = m.row(i);
        sum += *std::max_element(row.begin(), row.end());
    }
    return sum / static_cast<double>(m.targets());
}

double fused_value(std::span<const std::size_t> selected, const SimilarityMatrix& tv,
                   const SimilarityMatrix& vv, double alpha) {
    if (tv.sources() != vv.sources()) {
        throw Error(ErrorCode::kSourceCountMismatch, "text-vision has " +
                                                         std::to_string(tv.sources()) +
                                                         " sources, vision-vision has " +
                                                         std::to_string(vv.sources()));
    }
    return coverage_value(selected, tv) + alpha * coverage_value(selected, vv);
}

CoverageObjective::CoverageObjective(const SimilarityMatrix& m) : sources_(m.sources()) {
    add_term(m, 1.0);
}

CoverageObjective::CoverageObjective(const SimilarityMatrix& tv, const SimilarityMatrix& vv,
                                     double alpha)
    : sources_(tv.sources()) {
    if (tv.sources() != vv.sources()) {
        throw Error(ErrorCode::kSourceCountMismatch, "text-vision has " +
                                                         std::to_string(tv.sources()) +
                                                         " sources, vision-vision has " +
                                                         std::to_string(vv.sources()));
    }
    if (!(alpha >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must be >= 0");
    add_term(tv, 1.0);
    add_term(vv, alpha);
}

void CoverageObjective::add_term(const SimilarityMatrix& m, double weight) {
    Term term;
    term.targets = m.targets();
    term.weight = weight;
    term.by_source.resize(m.targets() * m.sources());
    for (std::size_t i = 0; i < m.targets(); ++i) {
        for (std::size_t j = 0; j < m.sources(); ++j) {
            const double x = m(i, j);
            term.by_source[j * m.targets() + i] = x;
            if (x < 0.0) nonnegative_ = false;
        }
    }
    terms_.push_back(std::move(term));
}

CoverageObjective::State CoverageObjective::initial_state() const {
    State state;
    for (const Term& term : terms_) {
        CoverState cover;
        cover.best_per_target.assign(term.targets, 0.0);
        state.terms.push_back(std::move(cover));
    }
    return state;
}

double CoverageObjective::term_gain(const Term& term, const CoverState& state,
                                    std::size_t source) const {
    if (term.targets == 0) return 0.0;
    const double* column = term.by_source.data() + source * term.targets;
    double sum = 0.0;
    if (state.empty) {
        for (std::size_t i = 0; i < term.targets; ++i) sum += column[i];
    } else {
        for (std::size_t i = 0; i < term.targets; ++i) {
            sum += std::max(0.0, column[i] - state.best_per_target[i]);
        }
    }
    return sum / static_cast<double>(term.targets);
}

double CoverageObjective::gain(const State& state, std::size_t source) const {
    double total = 0.0;
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        total += terms_[t].weight * term_gain(terms_[t], state.terms[t], source);
    }
    return total;
}

void CoverageObjective::add(State& state, std::size_t source) const {
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        const Term& term = terms_[t];
        CoverState& cover = state.terms[t];
        const double* column = term.by_source.data() + source * term.targets;
        double sum = 0.0;
        for (std::size_t i = 0; i < term.targets; ++i) {
            double& best = cover.best_per_target[i];
            best = cover.empty ? column[i] : std::max(best, column[i]);
            sum += best;
        }
        cover.empty = false;
        cover.value = term.targets == 0 ? 0.0 : sum / static_cast<double>(term.targets);
    }
}

double CoverageObjective::value(const State& state) const {
    double total = 0.0;
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        total += terms_[t].weight * state.terms[t].value;
    }
    return total;
}

double CoverageObjective::term_value(std::size_t term_index,
                                     std::span<const std::size_t> selected) const {
    check_indices(selected, sources_);
    const Term& term = terms_.at(term_index);
    if (selected.empty() || term.targets == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < term.targets; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j : selected) best = std::max(best, term.by_source[j * term.targets + i]);
        sum += best;
    }
    return sum / static_cast<double>(term.targets);
}

double CoverageObjective::value(std::span<const std::size_t> selected) const {
    double total = 0.0;
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        total += terms_[t].weight * term_value(t, selected);
    }
    return total;
}

namespace {

SelectionResult eager_greedy(const CoverageObjective& objective, std::size_t k) {
    SelectionResult result;
    const std::size_t n = objective.sources();
    std::vector<bool> taken(n, false);
    auto state = objective.initial_state();
    for (std::size_t step = 0; step < k; ++step) {
        std::size_t best_index = n;
        double best_gain = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < n; ++s) {
            if (taken[s]) continue;
            const double g = objective.gain(state, s);
            ++result.gain_evaluations;
            if (g > best_gain) {
                best_gain = g;
                best_index = s;
            }
        }
        taken[best_index] = true;
        objective.add(state, best_index);
        result.selected.push_back(best_index);
        result.gains.push_back(best_gain);
    }
    return result;
}

struct Bound {
    double gain;
    std::size_t index;
    std::size_t step;  // step at which `gain` was evaluated
};

// Max-heap on gain, then min index.
struct BoundOrder {
    bool operator()(const Bound& a, const Bound& b) const {
        if (a.gain != b.gain) return a.gain < b.gain;
        return a.index > b.index;
    }
};

using BoundQueue = std::priority_queue<Bound, std::vector<Bound>, BoundOrder>;

SelectionResult lazy_greedy(const CoverageObjective& objective, std::size_t k) {
    SelectionResult result;
    const std::size_t n = objective.sources();
    auto state = objective.initial_state();
    auto fill = [&](std::size_t step, const std::vector<bool>& taken) {
        std::vector<Bound> bounds;
        bounds.reserve(n);
        for (std::size_t s = 0; s < n; ++s) {
            if (taken[s]) continue;
            bounds.push_back({objective.gain(state, s), s, step});
            ++result.gain_evaluations;
        }
        return BoundQueue(BoundOrder{}, std::move(bounds));
    };
    std::vector<bool> taken(n, false);
    BoundQueue queue = fill(0, taken);
    for (std::size_t step = 0; step < k; ++step) {
        // Negative entries make f(empty) = 0 a poor baseline: the first gains
        // are not upper bounds for later ones, so refresh them all once.
        if (step == 1 && !objective.nonnegative()) queue = fill(1, taken);
        for (;;) {
            Bound top = queue.top();
            queue.pop();
            if (top.step == step) {
                taken[top.index] = true;
                objective.add(state, top.index);
                result.selected.push_back(top.index);
                result.gains.push_back(top.gain);
                break;
            }
            top.gain = objective.gain(state, top.index);
            top.step = step;
            ++result.gain_evaluations;
            queue.push(top);
        }
    }
    return result;
}

SelectionResult finish_single(SelectionResult result, const SimilarityMatrix& m) {
    const double f = coverage_value(result.selected, m);
    if (m.kind() == SimilarityKind::kRawVV || m.kind() == SimilarityKind::kCalibratedVV) {
        result.objective_vv = f;
    } else {
        result.objective_tv = f;
    }
    result.objective_fused = f;
    if (m.temperature() &&
        m.kind() == SimilarityKind::kCalibratedVV) {
        result.effective_tau_v = *m.temperature();
    }
    return result;
}

SelectionResult finish_fused(SelectionResult result, const SimilarityMatrix& tv,
                             const SimilarityMatrix& vv, double alpha) {
    result.objective_tv = coverage_value(result.selected, tv);
    result.objective_vv = coverage_value(result.selected, vv);
    result.objective_fused = result.objective_tv + alpha * result.objective_vv;
    if (vv.temperature()) result.effective_tau_v = *vv.temperature();
    return result;
}

}  // namespace

SelectionResult greedy(const CoverageObjective& objective, std::size_t k, bool lazy) {
    k = std::min(k, objective.sources());
    SelectionResult result = k == 0 ? SelectionResult{}
                             : lazy ? lazy_greedy(objective, k)
                                    : eager_greedy(objective, k);
    result.objective_fused = objective.value(result.selected);
    result.segments = {result.selected.size()};
    return result;
}

SelectionResult greedy_select(const SimilarityMatrix& m, std::size_t k) {
    return finish_single(greedy(CoverageObjective(m), k, false), m);
}

SelectionResult greedy_select_fused(const SimilarityMatrix& tv, const SimilarityMatrix& vv,
                                    double alpha, std::size_t k) {
    return finish_fused(greedy(CoverageObjective(tv, vv, alpha), k, false), tv, vv, alpha);
}

SelectionResult lazy_greedy_select(const SimilarityMatrix& m, std::size_t k) {
    return finish_single(greedy(CoverageObjective(m), k, true), m);
}

SelectionResult lazy_greedy_select_fused(const SimilarityMatrix& tv, const SimilarityMatrix& vv,
                                         double alpha, std::size_t k) {
    return finish_fused(greedy(CoverageObjective(tv, vv, alpha), k, true), tv, vv, alpha);
}

std::uint64_t binomial(std::size_t n, std::size_t k) noexcept {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t result = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        // result * (n - k + i) / i stays integral at every step.
        const std::uint64_t factor = n - k + i;
        if (result > std::numeric_limits<std::uint64_t>::max() / factor) {
            return std::numeric_limits<std::uint64_t>::max();
        }
        result = result * factor / i;
    }
    return result;
}

ExhaustiveResult exhaustive_opt(const CoverageObjective& objective, std::size_t k) {
    const std::size_t n = objective.sources();
    k = std::min(k, n);
    const std::uint64_t count = binomial(n, k);
    if (count > kMaxExhaustiveSubsets) {
        throw Error(ErrorCode::kInstanceTooLarge, "C(" + std::to_string(n) + ", " +
                                                      std::to_string(k) + ") exceeds " +
                                                      std::to_string(kMaxExhaustiveSubsets));
    }
    std::vector<std::size_t> subset(k);
    for (std::size_t i = 0; i < k; ++i) subset[i] = i;
    ExhaustiveResult best{subset, objective.value(subset)};
    if (k == 0) return best;
    for (;;) {
        // Advance to the next combination in lexicographic order.
        std::size_t pos = k;
        while (pos > 0 && subset[pos - 1] == n - k + pos - 1) --pos;
        if (pos == 0) break;
        ++subset[pos - 1];
        for (std::size_t i = pos; i < k; ++i) subset[i] = subset[i - 1] + 1;
        const double v = objective.value(subset);
        if (v > best.value) best = {subset, v};
    }
    return best;
}

ExhaustiveResult exhaustive_opt(const SimilarityMatrix& m, std::size_t k) {
    return exhaustive_opt(CoverageObjective(m), k);
}

ExhaustiveResult exhaustive_opt_fused(const SimilarityMatrix& tv, const SimilarityMatrix& vv,
                                      double alpha, std::size_t k) {
    return exhaustive_opt(CoverageObjective(tv, vv, alpha), k);
}

SubmodularReport check_submodular(const CoverageObjective& objective, std::size_t trials,
                                  std::uint64_t seed) {
    if (trials == 0) throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
    SubmodularReport report;
    const std::size_t n = objective.sources();
    if (n == 0) return report;
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::vector<std::size_t> a, b, outside;
    for (std::size_t t = 0; t < trials; ++t) {
        a.clear();
        b.clear();
        outside.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (coin(rng)) {
                b.push_back(j);
                if (coin(rng)) a.push_back(j);
            } else {
                outside.push_back(j);
            }
        }
        if (outside.empty()) {
            // B == N leaves nothing to add; move one element out of B (and A).
            const std::size_t drop = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
            std::erase(b, drop);
            std::erase(a, drop);
            outside.push_back(drop);
        }
        const std::size_t s =
            outside[std::uniform_int_distribution<std::size_t>(0, outside.size() - 1)(rng)];
        const double fa = objective.value(a);
        const double fb = objective.value(b);
        a.push_back(s);
        b.push_back(s);
        const double gain_a = objective.value(a) - fa;
        const double gain_b = objective.value(b) - fb;
        ++report.trials;
        if (gain_b - gain_a > kSubmodularSlack) {
            ++report.submodular_violations;
            report.worst_excess = std::max(report.worst_excess, gain_b - gain_a);
        }
        if (fa - fb > kSubmodularSlack) {
            ++report.monotone_violations;
            report.worst_excess = std::max(report.worst_excess, fa - fb);
        }
    }
    return report;
}

}  // namespace mmcov
