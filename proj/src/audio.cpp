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

#include "nacasr/audio.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nacasr/byte_io.hpp"

namespace nac::audio {

void AudioSignal::validate() const {
  if (samples.empty()) throw std::invalid_argument("audio signal is empty");
  if (sample_rate_hz != 16000 && sample_rate_hz != 24000) {
    throw std::invalid_argument("unsupported sample rate: " + std::to_string(sample_rate_hz) +
                                " Hz (expected 16000 or 24000)");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      throw std::invalid_argument("non-finite sample at index " + std::to_string(i));
    }
  }
}

AudioSignal decode_wav(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  AudioSignal signal;
  try {
    if (r.raw(4) != "RIFF") throw WavError("not a RIFF file");
    r.u32();  // riff size, not trusted
    if (r.raw(4) != "WAVE") throw WavError("not a WAVE file");
    bool have_fmt = false;
    while (true) {
      const std::string id = r.raw(4);
      const std::uint32_t size = r.u32();
      if (id == "fmt ") {
        if (size < 16) throw WavError("fmt chunk too small");
        const std::uint16_t format = r.u16();
        const std::uint16_t channels = r.u16();
        signal.sample_rate_hz = r.u32();
        r.u32();  // byte rate
        r.u16();  // block align
        const std::uint16_t bits = r.u16();
        if (format != 1) {
          throw WavError("unsupported WAV format tag " + std::to_string(format) +
                         " (only PCM is supported)");
        }
        if (channels != 1) throw WavError("unsupported channel count: " + std::to_string(channels));
        if (bits != 16) throw WavError("unsupported bits per sample: " + std::to_string(bits));
        r.raw(size - 16 + (size & 1u));
        have_fmt = true;
      } else if (id == "data") {
        if (!have_fmt) throw WavError("data chunk before fmt chunk");
        if (size % 2 != 0) throw WavError("data chunk size is not a whole number of samples");
        signal.samples.resize(size / 2);
        for (auto& s : signal.samples) {
          s = static_cast<double>(static_cast<std::int16_t>(r.u16())) / 32768.0;
        }
        break;
      } else {
        r.raw(size + (size & 1u));
      }
    }
  } catch (const io::TruncatedInput& e) {
    throw WavError(std::string("malformed WAV: ") + e.what());
  }
  return signal;
}

AudioSignal read_wav(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = io::read_file(path);
  } catch (const std::runtime_error& e) {
    throw WavError(e.what());
  }
  return decode_wav(bytes);
}

std::vector<std::uint8_t> encode_wav(const AudioSignal& signal) {
  const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * 2);
  io::ByteWriter w;
  w.raw("RIFF");
  w.u32(36 + data_bytes);
  w.raw("WAVE");
  w.raw("fmt ");
  w.u32(16);
  w.u16(1);
  w.u16(1);
  w.u32(signal.sample_rate_hz);
  w.u32(signal.sample_rate_hz * 2);
  w.u16(2);
  w.u16(16);
  w.raw("data");
  w.u32(data_bytes);
  for (double s : signal.samples) {
    const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  return w.take();
}

void write_wav(const AudioSignal& signal, const std::filesystem::path& path) {
  io::write_file(path, encode_wav(signal));
}

Rational nominal_frame_rate(std::uint32_t sample_rate_hz, std::uint32_t samples_per_frame) {
  if (samples_per_frame == 0) throw std::invalid_argument("samples per frame must be positive");
  return Rational(sample_rate_hz, samples_per_frame);
}

}  // namespace nac::audio
