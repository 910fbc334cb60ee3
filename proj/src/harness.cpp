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

#include "mmcov/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <iomanip>
#include <sstream>

#include "mmcov/coverage.hpp"
#include "mmcov/pipeline.hpp"
#include "mmcov/similarity.hpp"

namespace mmcov {

namespace {

TokenMatrix random_unit_rows(std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    std::vector<float> data(rows * dim);
    for (float& x : data) x = static_cast<float>(normal(rng));
    return normalize(TokenMatrix(rows, dim, TokenRole::kVisionPost, std::move(data)));
}

// Argmin stand-in for greedy; used only as a negative control.
std::vector<std::size_t> faulty_greedy(const CoverageObjective& objective, std::size_t k) {
    std::vector<std::size_t> selected;
    std::vector<bool> taken(objective.sources(), false);
    auto state = objective.initial_state();
    for (std::size_t step = 0; step < k; ++step) {
        std::size_t worst = 0;
        double worst_gain = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < objective.sources(); ++s) {
            if (taken[s]) continue;
            const double g = objective.gain(state, s);
            if (g < worst_gain) {
                worst_gain = g;
                worst = s;
            }
        }
        taken[worst] = true;
        objective.add(state, worst);
        selected.push_back(worst);
    }
    return selected;
}

double ratio_against_opt(const CoverageObjective& objective, std::size_t k, bool fault,
                         std::size_t& lazy_mismatches) {
    const ExhaustiveResult opt = exhaustive_opt(objective, k);
    std::vector<std::size_t> picked;
    if (fault) {
        picked = faulty_greedy(objective, k);
    } else {
        const SelectionResult eager = greedy(objective, k, false);
        const SelectionResult lazy = greedy(objective, k, true);
        if (eager.selected != lazy.selected) ++lazy_mismatches;
        picked = eager.selected;
    }
    const double value = objective.value(picked);
    return opt.value > 0.0 ? value / opt.value : 1.0;
}

std::vector<double> stage_values(const std::vector<StageTimings>& runs,
                                 std::uint64_t StageTimings::*field) {
    std::vector<double> ms;
    for (const auto& t : runs) ms.push_back(static_cast<double>(t.*field) / 1e6);
    return ms;
}

StageStats summarize(std::string stage, std::vector<double> ms) {
    std::sort(ms.begin(), ms.end());
    StageStats s{std::move(stage)};
    if (ms.empty()) return s;
    double sum = 0.0;
    for (double x : ms) sum += x;
    s.mean_ms = sum / static_cast<double>(ms.size());
    // Nearest-rank percentiles.
    auto rank = [&](double p) {
        const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(ms.size())));
        return ms[std::clamp<std::size_t>(idx, 1, ms.size()) - 1];
    };
    s.p50_ms = rank(0.50);
    s.p95_ms = rank(0.95);
    return s;
}

}  // namespace

VerifyReport run_verify(const VerifyParams& params) {
    if (params.max_n < 1 || params.max_k < 1) {
        throw Error(ErrorCode::kInvalidArgument, "max_n and max_k must be >= 1");
    }
    VerifyReport report;
    std::mt19937_64 rng(params.seed);
    std::uniform_int_distribution<std::size_t> size(1, params.max_n);
    std::uniform_int_distribution<std::size_t> budget(1, params.max_k);
    std::uniform_int_distribution<std::size_t> width(2, 16);
    for (std::size_t t = 0; t < params.trials; ++t) {
        const std::size_t m = size(rng);
        const std::size_t n = size(rng);
        const std::size_t k = std::min(budget(rng), n);
        const std::size_t dim = width(rng);
        const TokenMatrix text = random_unit_rows(m, dim, rng);
        const TokenMatrix post = random_unit_rows(n, dim, rng);
        const TokenMatrix pre = random_unit_rows(n, width(rng), rng);
        const SimilarityMatrix tv = calibrate(build_tv(text, post), 0.02);
        const SimilarityMatrix vv = calibrate(build_vv(pre), 0.2);

        const double single = ratio_against_opt(CoverageObjective(tv), k, params.inject_fault,
                                                report.lazy_mismatches);
        const double fused = ratio_against_opt(CoverageObjective(tv, vv, 0.5), k,
                                               params.inject_fault, report.lazy_mismatches);
        report.min_ratio_single = std::min(report.min_ratio_single, single);
        report.min_ratio_fused = std::min(report.min_ratio_fused, fused);
        if (single < kGreedyBound) ++report.bound_violations;
        if (fused < kGreedyBound) ++report.bound_violations;
        ++report.trials;
    }
    report.min_ratio = std::min(report.min_ratio_single, report.min_ratio_fused);

    // Chains are spread over a handful of seeded 8 x 10 instances.
    constexpr std::size_t kChainInstances = 10;
    if (params.chains > 0) {
        for (std::size_t inst = 0; inst < kChainInstances; ++inst) {
            const TokenMatrix text = random_unit_rows(8, 8, rng);
            const TokenMatrix post = random_unit_rows(10, 8, rng);
            const TokenMatrix pre = random_unit_rows(10, 8, rng);
            const SimilarityMatrix tv = calibrate(build_tv(text, post), 0.02);
            const SimilarityMatrix vv = calibrate(build_vv(pre), 0.2);
            const std::size_t share = params.chains / kChainInstances +
                                      (inst < params.chains % kChainInstances ? 1 : 0);
            if (share == 0) continue;
            for (const auto& objective : {CoverageObjective(tv), CoverageObjective(tv, vv, 0.5)}) {
                const SubmodularReport sub = check_submodular(objective, share, rng());
                report.chains += sub.trials;
                report.submodular_violations += sub.submodular_violations;
                report.monotone_violations += sub.monotone_violations;
            }
        }
    }
    return report;
}

std::string format_verify_report(const VerifyReport& r) {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed;
    out << "instances            " << r.trials << "\n";
    out << "min ratio (single)   " << r.min_ratio_single << "\n";
    out << "min ratio (fused)    " << r.min_ratio_fused << "\n";
    out << "min ratio            " << r.min_ratio << "  (bound " << kGreedyBound << ")\n";
    out << "bound violations     " << r.bound_violations << "\n";
    out << "lazy mismatches      " << r.lazy_mismatches << "\n";
    out << "chains checked       " << r.chains << "\n";
    out << "submodular violations " << r.submodular_violations << "\n";
    out << "monotone violations  " << r.monotone_violations << "\n";
    out << "result               " << (r.ok() ? "PASS" : "FAIL") << "\n";
    return out.str();
}

BenchReport run_bench(const BenchParams& params) {
    if (params.reps == 0) throw Error(ErrorCode::kInvalidArgument, "reps must be >= 1");
    SynthParams synth;
    synth.n = params.n;
    synth.m = params.m;
    synth.dim_pre = params.dim;
    synth.dim_post = params.dim;
    synth.seed = params.seed;
    synth.crop_sizes = params.crop_sizes;
    const SampleInput sample = synth_sample(synth);

    CoverageConfig config;
    config.budget = params.budget;
    BenchReport report;
    std::vector<StageTimings> runs;
    for (std::size_t rep = 0; rep < params.reps; ++rep) {
        StageTimings timings;
        const SelectionResult lazy = select_tokens(sample, config, {params.threads, &timings});
        runs.push_back(timings);
        if (rep == 0) {
            report.selected = lazy.selected;
            report.lazy_evaluations = lazy.gain_evaluations;
        } else if (lazy.selected != report.selected) {
            report.identical_selections = false;
        }
    }
    CoverageConfig eager_config = config;
    eager_config.lazy = false;
    StageTimings eager_timings;
    const SelectionResult eager =
        select_tokens(sample, eager_config, {params.threads, &eager_timings});
    report.eager_evaluations = eager.gain_evaluations;
    if (eager.selected != report.selected) report.identical_selections = false;

    const std::pair<const char*, std::uint64_t StageTimings::*> fields[] = {
        {"normalize", &StageTimings::normalize_ns}, {"pool", &StageTimings::pool_ns},
        {"similarity", &StageTimings::similarity_ns}, {"calibrate", &StageTimings::calibrate_ns},
        {"adapt", &StageTimings::adapt_ns}, {"select (lazy)", &StageTimings::select_ns},
    };
    for (const auto& [name, field] : fields) report.stages.push_back(summarize(name, stage_values(runs, field)));
    std::vector<double> totals;
    for (const auto& t : runs) totals.push_back(static_cast<double>(t.total_ns()) / 1e6);
    report.stages.push_back(summarize("total", totals));
    report.stages.push_back(
        summarize("select (eager, 1 run)", {static_cast<double>(eager_timings.select_ns) / 1e6}));
    return report;
}

std::string format_bench_report(const BenchReport& r) {
    std::ostringstream out;
    out.precision(3);
    out << std::fixed;
    out << "stage                    mean_ms     p50_ms     p95_ms\n";
    for (const auto& s : r.stages) {
        out << s.stage;
        for (std::size_t pad = s.stage.size(); pad < 22; ++pad) out << ' ';
        out << ' ' << std::setw(10) << s.mean_ms << ' ' << std::setw(10) << s.p50_ms << ' '
            << std::setw(10) << s.p95_ms << "\n";
    }
    out << "gain evaluations eager  " << r.eager_evaluations << "\n";
    out << "gain evaluations lazy   " << r.lazy_evaluations << "\n";
    out << "selected tokens         " << r.selected.size() << "\n";
    out << "selections identical    " << (r.identical_selections ? "yes" : "no") << "\n";
    return out.str();
}

}  // namespace mmcov
