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

#include "mmcov/dump_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <string_view>

namespace mmcov {

namespace {

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int shift = 0; shift < 32; shift += 8) bytes_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
    void tag(std::string_view text) { bytes_.insert(bytes_.end(), text.begin(), text.end()); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void floats(std::span<const float> values) {
        for (float v : values) f32(v);
    }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_ + k]) << (8 * k);
        pos_ += 4;
        return v;
    }

    std::vector<float> floats(std::size_t count, const char* what) {
        need_elements(count, 4, what);
        std::vector<float> out(count);
        for (float& x : out) x = std::bit_cast<float>(u32(what));
        return out;
    }

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

    void need_elements(std::size_t count, std::size_t width, const char* what) const {
        if (count > remaining() / width) truncated(what);
    }

private:
    void need(std::size_t count, const char* what) const {
        if (remaining() < count) truncated(what);
    }
    [[noreturn]] void truncated(const char* what) const {
        throw Error(ErrorCode::kTruncatedFile, std::string("file ends inside ") + what);
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t checked_u32(std::size_t value, const char* what) {
    if (value > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorCode::kInvalidArgument, std::string(what) + " does not fit in u32");
    }
    return static_cast<std::uint32_t>(value);
}

}  // namespace

std::vector<std::uint8_t> encode_dump(const SampleInput& input) {
    input.validate();
    if (input.vision_pre.dim() == 0 || input.vision_post.dim() == 0) {
        throw Error(ErrorCode::kInvariantViolation, "dims must be >= 1");
    }
    std::uint32_t flags = 0;
    if (input.agent_text) flags |= kFlagAgent;
    if (input.word_spans) flags |= kFlagSpans;
    if (input.crop_sizes) flags |= kFlagCrops;

    Writer body;
    body.tag("MMCV");
    body.u32(kDumpVersion);
    body.u32(flags);
    body.u32(checked_u32(input.vision_post.rows(), "n"));
    body.u32(checked_u32(input.text.rows(), "m"));
    body.u32(checked_u32(input.agent_text ? input.agent_text->rows() : 0, "o"));
    body.u32(checked_u32(input.vision_pre.dim(), "dim_pre"));
    body.u32(checked_u32(input.vision_post.dim(), "dim_post"));
    body.u32(checked_u32(input.word_spans ? input.word_spans->size() : 0, "num_spans"));
    body.u32(checked_u32(input.crop_sizes ? input.crop_sizes->size() : 0, "num_crops"));
    body.floats(input.vision_pre.data());
    body.floats(input.vision_post.data());
    body.floats(input.text.data());
    if (input.agent_text) body.floats(input.agent_text->data());
    if (input.word_spans) {
        for (const auto& [start, end] : input.word_spans->spans()) {
            body.u32(checked_u32(start, "span start"));
            body.u32(checked_u32(end, "span end"));
        }
    }
    if (input.crop_sizes) {
        for (std::size_t size : *input.crop_sizes) body.u32(checked_u32(size, "crop size"));
    }
    return body.take();
}

SampleInput decode_dump(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw Error(ErrorCode::kTruncatedFile, "file ends inside magic");
    if (bytes[0] != 'M' || bytes[1] != 'M' || bytes[2] != 'C' || bytes[3] != 'V') {
        throw Error(ErrorCode::kBadMagic, "expected \"MMCV\"");
    }
    Reader r(bytes.subspan(4));
    const std::uint32_t version = r.u32("header");
    if (version != kDumpVersion) {
        throw Error(ErrorCode::kBadVersion, "unsupported version " + std::to_string(version));
    }
    const std::uint32_t flags = r.u32("header");
    const std::size_t n = r.u32("header");
    const std::size_t m = r.u32("header");
    const std::size_t o = r.u32("header");
    const std::size_t dim_pre = r.u32("header");
    const std::size_t dim_post = r.u32("header");
    const std::size_t num_spans = r.u32("header");
    const std::size_t num_crops = r.u32("header");

    auto invariant = [](bool ok, const std::string& what) {
        if (!ok) throw Error(ErrorCode::kInvariantViolation, what);
    };
    invariant((flags & ~(kFlagAgent | kFlagSpans | kFlagCrops)) == 0, "unknown flag bits set");
    invariant(dim_pre >= 1 && dim_post >= 1, "dims must be >= 1");
    invariant((flags & kFlagAgent) != 0 || o == 0, "o > 0 but agent flag is clear");
    invariant((flags & kFlagSpans) != 0 || num_spans == 0, "num_spans > 0 but spans flag is clear");
    invariant((flags & kFlagCrops) != 0 || num_crops == 0, "num_crops > 0 but crop flag is clear");

    // Sizes are checked against the remaining bytes before any allocation.
    r.need_elements(n, 4 * dim_pre, "vision_pre");
    auto pre = r.floats(n * dim_pre, "vision_pre");
    r.need_elements(n, 4 * dim_post, "vision_post");
    auto post = r.floats(n * dim_post, "vision_post");
    r.need_elements(m, 4 * dim_post, "text");
    auto text = r.floats(m * dim_post, "text");

    SampleInput input{
        TokenMatrix(n, dim_pre, TokenRole::kVisionPre, std::move(pre)),
        TokenMatrix(n, dim_post, TokenRole::kVisionPost, std::move(post)),
        TokenMatrix(m, dim_post, TokenRole::kTextQuery, std::move(text)),
        std::nullopt,
        std::nullopt,
        std::nullopt,
    };
    if (flags & kFlagAgent) {
        r.need_elements(o, 4 * dim_post, "agent");
        input.agent_text = TokenMatrix(o, dim_post, TokenRole::kAgentText, r.floats(o * dim_post, "agent"));
    }
    if (flags & kFlagSpans) {
        r.need_elements(num_spans, 8, "spans");
        std::vector<std::pair<std::size_t, std::size_t>> spans(num_spans);
        for (auto& [start, end] : spans) {
            start = r.u32("spans");
            end = r.u32("spans");
        }
        input.word_spans = WordSpans(std::move(spans));
    }
    if (flags & kFlagCrops) {
        r.need_elements(num_crops, 4, "crop_sizes");
        std::vector<std::size_t> crops(num_crops);
        for (std::size_t& size : crops) size = r.u32("crop_sizes");
        input.crop_sizes = std::move(crops);
    }
    invariant(r.remaining() == 0, std::to_string(r.remaining()) + " trailing bytes after payload");
    input.validate();
    return input;
}

void write_dump(const SampleInput& input, const std::filesystem::path& path) {
    const auto bytes = encode_dump(input);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

SampleInput read_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                          std::istreambuf_iterator<char>());
    return decode_dump(bytes);
}

}  // namespace mmcov
