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

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmcov {

// Numeric values are mirrored by mmcov_status in mmcov.h; keep them in sync.
enum class ErrorCode : int {
    kInvalidArgument = 1,
    kDegenerateRow = 2,
    kDimMismatch = 3,
    kNonPositiveTau = 4,
    kBadSpans = 5,
    kIndexOutOfRange = 6,
    kSourceCountMismatch = 7,
    kInstanceTooLarge = 8,
    kBudgetExceedsTokens = 9,
    kZeroBaseline = 10,
    kBadMagic = 11,
    kBadVersion = 12,
    kTruncatedFile = 13,
    kInvariantViolation = 14,
    kIo = 15,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised by normalize() for a row whose L2 norm is below epsilon.
class DegenerateRowError : public Error {
public:
    explicit DegenerateRowError(std::size_t index)
        : Error(ErrorCode::kDegenerateRow, "row " + std::to_string(index) + " has near-zero norm"),
          index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

}  // namespace mmcov
