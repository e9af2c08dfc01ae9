// Copyright 2026 The nacasr Authors. All Rights Reserved.
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


// `.nacs` code streams: a 33-byte little-endian header followed by
// frame_count x n_codebooks u16 codes, frame-major.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "nacasr/quantizers.hpp"
#include "nacasr/rational.hpp"

namespace nac::stream {

inline constexpr std::uint8_t kStreamVersion = 1;
inline constexpr std::size_t kHeaderBytes = 33;

enum class QuantizerKind : std::uint8_t { rvq = 0, fsq = 1 };
const char* quantizer_name(QuantizerKind kind);

struct CodeStreamHeader {
  QuantizerKind quantizer = QuantizerKind::rvq;
  std::uint32_t sample_rate = 16000;
  std::uint32_t samples_per_frame = 200;
  std::uint8_t n_codebooks = 8;
  std::uint16_t codebook_size = 1024;
  std::uint64_t original_sample_count = 0;
  std::uint64_t frame_count = 0;

  /// Throws StreamError(invalid_header) when the fields are inconsistent.
  void validate() const;
  bool operator==(const CodeStreamHeader&) const = default;
};

enum class StreamErrorKind { bad_magic, bad_version, truncated, code_out_of_range, trailing_bytes, invalid_header };

class StreamError : public std::runtime_error {
 public:
  StreamError(StreamErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  StreamErrorKind kind() const { return kind_; }

 private:
  StreamErrorKind kind_;
};

struct CodeStream {
  CodeStreamHeader header;
  quant::Codes codes;
  bool operator==(const CodeStream&) const = default;
};

std::vector<std::uint8_t> write_stream(const CodeStream& stream);
CodeStream read_stream(std::span<const std::uint8_t> bytes);

void save_stream(const CodeStream& stream, const std::filesystem::path& path);
CodeStream load_stream(const std::filesystem::path& path);

/// frame_rate * n_codebooks * ceil(log2(codebook_size)).
double bitrate_bps(Rational frame_rate_hz, std::uint32_t n_codebooks, std::uint32_t codebook_size);
/// Exact rational form of bitrate_bps.
Rational bitrate_bps_exact(Rational frame_rate_hz, std::uint32_t n_codebooks, std::uint32_t codebook_size);
/// frame_rate * n_codebooks * log2(codebook_size), the information rate.
double information_rate_bps(Rational frame_rate_hz, std::uint32_t n_codebooks,
                            std::uint32_t codebook_size);
/// ceil(log2(n)) for n >= 1, in integers.
std::uint32_t bits_per_code(std::uint32_t codebook_size);

}  // namespace nac::stream
