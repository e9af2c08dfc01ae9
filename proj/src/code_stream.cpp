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


#include "nacasr/code_stream.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "nacasr/byte_io.hpp"

namespace nac::stream {

const char* quantizer_name(QuantizerKind kind) {
  return kind == QuantizerKind::rvq ? "rvq" : "fsq";
}

void CodeStreamHeader::validate() const {
  auto fail = [](const std::string& m) { throw StreamError(StreamErrorKind::invalid_header, m); };
  if (quantizer != QuantizerKind::rvq && quantizer != QuantizerKind::fsq) {
    fail("unknown quantizer id " + std::to_string(static_cast<int>(quantizer)));
  }
  if (sample_rate == 0) fail("sample rate is zero");
  if (samples_per_frame == 0) fail("samples per frame is zero");
  if (n_codebooks == 0) fail("stream has no codebooks");
  if (codebook_size < 2) fail("codebook size " + std::to_string(codebook_size) + " is below 2");
  if (frame_count > UINT64_MAX / samples_per_frame ||
      frame_count * samples_per_frame < original_sample_count) {
    fail(std::to_string(frame_count) + " frames of " + std::to_string(samples_per_frame) +
         " samples cannot hold " + std::to_string(original_sample_count) + " samples");
  }
}

std::vector<std::uint8_t> write_stream(const CodeStream& stream) {
  const auto& h = stream.header;
  h.validate();
  if (stream.codes.frames != h.frame_count || stream.codes.n_codebooks != h.n_codebooks) {
    throw StreamError(StreamErrorKind::invalid_header,
                      "code matrix " + std::to_string(stream.codes.frames) + " x " +
                          std::to_string(stream.codes.n_codebooks) + " does not match header");
  }
  try {
    quant::check_code_range(stream.codes, h.codebook_size);
  } catch (const std::out_of_range& e) {
    throw StreamError(StreamErrorKind::code_out_of_range, e.what());
  }
  io::ByteWriter w;
  w.raw("NACS");
  w.u8(kStreamVersion);
  w.u8(static_cast<std::uint8_t>(h.quantizer));
  w.u32(h.sample_rate);
  w.u32(h.samples_per_frame);
  w.u8(h.n_codebooks);
  w.u16(h.codebook_size);
  w.u64(h.original_sample_count);
  w.u64(h.frame_count);
  for (std::int32_t c : stream.codes.values) w.u16(static_cast<std::uint16_t>(c));
  return w.take();
}

CodeStream read_stream(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  CodeStream s;
  auto& h = s.header;
  try {
    if (r.raw(4) != "NACS") throw StreamError(StreamErrorKind::bad_magic, "bad magic");
    const std::uint8_t version = r.u8();
    if (version != kStreamVersion) {
      throw StreamError(StreamErrorKind::bad_version,
                        "unsupported stream version " + std::to_string(version));
    }
    const std::uint8_t q = r.u8();
    if (q > 1) {
      throw StreamError(StreamErrorKind::invalid_header, "unknown quantizer id " + std::to_string(q));
    }
    h.quantizer = static_cast<QuantizerKind>(q);
    h.sample_rate = r.u32();
    h.samples_per_frame = r.u32();
    h.n_codebooks = r.u8();
    h.codebook_size = r.u16();
    h.original_sample_count = r.u64();
    h.frame_count = r.u64();
    h.validate();
    const std::uint64_t n = h.frame_count * h.n_codebooks;
    if (n > r.remaining() / 2) {
      throw StreamError(StreamErrorKind::truncated,
                        "truncated stream: header promises " + std::to_string(n) + " codes, " +
                            std::to_string(r.remaining()) + " bytes remain");
    }
    s.codes = quant::Codes(h.frame_count, h.n_codebooks);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint16_t c = r.u16();
      if (c >= h.codebook_size) {
        throw StreamError(StreamErrorKind::code_out_of_range,
                          "code " + std::to_string(c) + " at frame " +
                              std::to_string(i / h.n_codebooks) + " of codebook " +
                              std::to_string(i % h.n_codebooks) + " is outside [0, " +
                              std::to_string(h.codebook_size) + ")");
      }
      s.codes.values[i] = c;
    }
  } catch (const io::TruncatedInput& e) {
    throw StreamError(StreamErrorKind::truncated, std::string("truncated stream: ") + e.what());
  }
  if (!r.at_end()) {
    throw StreamError(StreamErrorKind::trailing_bytes,
                      std::to_string(r.remaining()) + " trailing bytes after the last code");
  }
  return s;
}

void save_stream(const CodeStream& stream, const std::filesystem::path& path) {
  io::write_file(path, write_stream(stream));
}

CodeStream load_stream(const std::filesystem::path& path) { return read_stream(io::read_file(path)); }

std::uint32_t bits_per_code(std::uint32_t codebook_size) {
  if (codebook_size == 0) throw std::invalid_argument("codebook size must be positive");
  return static_cast<std::uint32_t>(std::bit_width(codebook_size - 1));
}

Rational bitrate_bps_exact(Rational frame_rate_hz, std::uint32_t n_codebooks,
                           std::uint32_t codebook_size) {
  if (frame_rate_hz.num() <= 0 || n_codebooks == 0 || codebook_size == 0) {
    throw std::invalid_argument("bitrate inputs must be positive");
  }
  return frame_rate_hz * Rational(static_cast<std::int64_t>(n_codebooks) * bits_per_code(codebook_size));
}

double bitrate_bps(Rational frame_rate_hz, std::uint32_t n_codebooks, std::uint32_t codebook_size) {
  return bitrate_bps_exact(frame_rate_hz, n_codebooks, codebook_size).to_double();
}

double information_rate_bps(Rational frame_rate_hz, std::uint32_t n_codebooks,
                            std::uint32_t codebook_size) {
  if (frame_rate_hz.num() <= 0 || n_codebooks == 0 || codebook_size == 0) {
    throw std::invalid_argument("bitrate inputs must be positive");
  }
  return frame_rate_hz.to_double() * n_codebooks * std::log2(static_cast<double>(codebook_size));
}

}  // namespace nac::stream
