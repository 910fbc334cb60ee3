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

#include <optional>
#include <string>
#include <string_view>

#include "mmcov/core_types.hpp"
#include "mmcov/pipeline.hpp"

namespace mmcov {

std::string_view mode_name(CoverageMode mode) noexcept;
std::string_view pooling_name(Pooling pooling) noexcept;
std::optional<CoverageMode> parse_mode(std::string_view name) noexcept;
std::optional<Pooling> parse_pooling(std::string_view name) noexcept;

/// One result line: a single JSON object, no trailing newline. Timing is
/// included only when `timings` is non-null, since it varies run to run.
std::string result_record_json(std::string_view sample_id, const SelectionResult& result,
                               const CoverageConfig& config, const StageTimings* timings);

}  // namespace mmcov
