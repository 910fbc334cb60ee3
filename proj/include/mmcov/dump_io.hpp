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

// EmbeddingDump container ("MMCV", version 1). Little-endian throughout:
//
//   magic "MMCV" | version u32 | flags u32
//   n, m, o, dim_pre, dim_post, num_spans, num_crops : u32
//   vision_pre  n x dim_pre  f32
//   vision_post n x dim_post f32
//   text        m x dim_post f32
//   agent       o x dim_post f32      (flags bit0)
//   spans       num_spans x 2 u32     (flags bit1)
//   crop_sizes  num_crops u32         (flags bit2)
//
// No padding; nothing may follow the last section.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mmcov/pipeline.hpp"

namespace mmcov {

inline constexpr std::uint32_t kDumpVersion = 1;
inline constexpr std::uint32_t kFlagAgent = 1u << 0;
inline constexpr std::uint32_t kFlagSpans = 1u << 1;
inline constexpr std::uint32_t kFlagCrops = 1u << 2;
inline constexpr std::size_t kDumpHeaderBytes = 4 + 4 + 4 + 7 * 4;

std::vector<std::uint8_t> encode_dump(const SampleInput& input);

/// Parses and validates a dump image. Errors: kBadMagic, kBadVersion,
/// kTruncatedFile, kInvariantViolation.
SampleInput decode_dump(std::span<const std::uint8_t> bytes);

void write_dump(const SampleInput& input, const std::filesystem::path& path);
SampleInput read_dump(const std::filesystem::path& path);

}  // namespace mmcov
