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

#include "mmcov/record.hpp"

#include <json.hpp>

namespace mmcov {

std::string_view mode_name(CoverageMode mode) noexcept {
    switch (mode) {
        case CoverageMode::kTextVisionOnly: return "tv";
        case CoverageMode::kVisionVisionOnly: return "vv";
        case CoverageMode::kMultimodal: return "mm";
    }
    return "mm";
}

std::string_view pooling_name(Pooling pooling) noexcept {
    switch (pooling) {
        case Pooling::kNone: return "none";
        case Pooling::kPreMean: return "pre-mean";
        case Pooling::kPreMax: return "pre-max";
        case Pooling::kPreFirst: return "pre-first";
        case Pooling::kPostMean: return "post-mean";
        case Pooling::kPostMax: return "post-max";
        case Pooling::kPostFirst: return "post-first";
    }
    return "none";
}

std::optional<CoverageMode> parse_mode(std::string_view name) noexcept {
    for (auto mode : {CoverageMode::kTextVisionOnly, CoverageMode::kVisionVisionOnly,
                      CoverageMode::kMultimodal}) {
        if (mode_name(mode) == name) return mode;
    }
    return std::nullopt;
}

std::optional<Pooling> parse_pooling(std::string_view name) noexcept {
    for (auto p : {Pooling::kNone, Pooling::kPreMean, Pooling::kPreMax, Pooling::kPreFirst,
                   Pooling::kPostMean, Pooling::kPostMax, Pooling::kPostFirst}) {
        if (pooling_name(p) == name) return p;
    }
    return std::nullopt;
}

std::string result_record_json(std::string_view sample_id, const SelectionResult& result,
                               const CoverageConfig& config, const StageTimings* timings) {
    // ordered_json keeps field order stable and readable.
    nlohmann::ordered_json record;
    record["sample"] = sample_id;
    record["mode"] = mode_name(config.mode);
    record["budget"] = config.budget;
    record["selected"] = result.selected;
    record["gains"] = result.gains;
    record["objective_tv"] = result.objective_tv;
    record["objective_vv"] = result.objective_vv;
    record["objective_fused"] = result.objective_fused;
    record["tau_t"] = config.tau_t;
    record["alpha"] = config.alpha;
    record["effective_tau_v"] = result.effective_tau_v;
    record["segments"] = result.segments;
    record["segment_tau_v"] = result.segment_tau_v;
    record["gain_evaluations"] = result.gain_evaluations;
    if (timings != nullptr) {
        record["timing_ns"] = {
            {"normalize", timings->normalize_ns}, {"pool", timings->pool_ns},
            {"similarity", timings->similarity_ns}, {"calibrate", timings->calibrate_ns},
            {"adapt", timings->adapt_ns}, {"select", timings->select_ns},
            {"total", timings->total_ns()},
        };
    }
    return record.dump();
}

}  // namespace mmcov
