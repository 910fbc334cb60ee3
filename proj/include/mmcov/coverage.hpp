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

// Coverage objective f(S; M) = (1/m) sum_i max_{j in S} M[i][j], its weighted
// multimodal sum, and the greedy maximizers over it.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mmcov/core_types.hpp"

namespace mmcov {

/// f(S; M). f(empty) is 0. Throws kIndexOutOfRange for an index >= sources.
double coverage_value(std::span<const std::size_t> selected, const SimilarityMatrix& m);

/// f(N; M): mean of the row maxima.
double full_coverage(const SimilarityMatrix& m);

/// f(S; tv) + alpha * f(S; vv).
double fused_value(std::span<const std::size_t> selected, const SimilarityMatrix& tv,
                   const SimilarityMatrix& vv, double alpha);

/// Incremental state of one coverage term.
struct CoverState {
    std::vector<double> best_per_target;
    double value = 0.0;
    bool empty = true;
};

/// A non-negative weighted sum of coverage terms over a shared source set.
/// Holds a source-major copy of every matrix so a gain evaluation walks one
/// contiguous column.
class CoverageObjective {
public:
    explicit CoverageObjective(const SimilarityMatrix& m);
    CoverageObjective(const SimilarityMatrix& tv, const SimilarityMatrix& vv, double alpha);

    std::size_t sources() const noexcept { return sources_; }
    std::size_t term_count() const noexcept { return terms_.size(); }
    bool nonnegative() const noexcept { return nonnegative_; }

    struct State {
        std::vector<CoverState> terms;
    };

    State initial_state() const;

    /// f(S + {s}) - f(S) for the set summarized by `state`.
    double gain(const State& state, std::size_t source) const;

    void add(State& state, std::size_t source) const;

    /// Weighted objective of the state.
    double value(const State& state) const;

    /// Weighted objective evaluated directly from the set.
    double value(std::span<const std::size_t> selected) const;

    /// Unweighted value of one term.
    double term_value(std::size_t term, std::span<const std::size_t> selected) const;

private:
    struct Term {
        std::size_t targets = 0;
        double weight = 1.0;
        std::vector<double> by_source;  // [source][target]
    };

    void add_term(const SimilarityMatrix& m, double weight);
    double term_gain(const Term& term, const CoverState& state, std::size_t source) const;

    std::size_t sources_ = 0;
    bool nonnegative_ = true;
    std::vector<Term> terms_;
};

/// Greedy maximization of `objective` under cardinality `k`. Ties go to the
/// lowest index. The lazy variant keeps stale upper bounds in a priority queue
/// and yields the same sequence as the eager one.
SelectionResult greedy(const CoverageObjective& objective, std::size_t k, bool lazy);

SelectionResult greedy_select(const SimilarityMatrix& m, std::size_t k);
SelectionResult greedy_select_fused(const SimilarityMatrix& tv, const SimilarityMatrix& vv,
                                    double alpha, std::size_t k);
SelectionResult lazy_greedy_select(const SimilarityMatrix& m, std::size_t k);
SelectionResult lazy_greedy_select_fused(const SimilarityMatrix& tv, const SimilarityMatrix& vv,
                                         double alpha, std::size_t k);

struct ExhaustiveResult {
    std::vector<std::size_t> selected;
    double value = 0.0;
};

inline constexpr std::uint64_t kMaxExhaustiveSubsets = 2'000'000;

/// Number of k-subsets of n, saturating at UINT64_MAX.
std::uint64_t binomial(std::size_t n, std::size_t k) noexcept;

/// Exact maximizer over all k-subsets (k clamped to sources); lexicographically
/// smallest on ties. Throws kInstanceTooLarge past kMaxExhaustiveSubsets.
ExhaustiveResult exhaustive_opt(const CoverageObjective& objective, std::size_t k);
ExhaustiveResult exhaustive_opt(const SimilarityMatrix& m, std::size_t k);
ExhaustiveResult exhaustive_opt_fused(const SimilarityMatrix& tv, const SimilarityMatrix& vv,
                                      double alpha, std::size_t k);

struct SubmodularReport {
    std::size_t trials = 0;
    std::size_t submodular_violations = 0;
    std::size_t monotone_violations = 0;
    // Largest amount by which either inequality failed (0 if none did).
    double worst_excess = 0.0;
};

inline constexpr double kSubmodularSlack = 1e-9;

/// Samples chains A subset B subset N with s outside B and checks
/// f(A+s)-f(A) >= f(B+s)-f(B) and f(A) <= f(B).
SubmodularReport check_submodular(const CoverageObjective& objective, std::size_t trials,
                                  std::uint64_t seed);

}  // namespace mmcov
