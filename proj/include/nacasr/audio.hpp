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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "nacasr/rational.hpp"

namespace nac::audio {

class WavError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mono waveform. Samples are nominally in [-1, 1].
struct AudioSignal {
  std::vector<double> samples;
  std::uint32_t sample_rate_hz = 16000;

  /// Non-empty, finite, and at 16 or 24 kHz; throws std::invalid_argument.
  void validate() const;
  double seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate_hz);
  }
};

/// PCM-16 mono RIFF/WAVE. Samples scale by 1/32768.
AudioSignal read_wav(const std::filesystem::path& path);
AudioSignal decode_wav(std::span<const std::uint8_t> bytes);

/// Canonical 44-byte header. Rounds half away from zero and clamps.
void write_wav(const AudioSignal& signal, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_wav(const AudioSignal& signal);

/// f_s / f_down, exact.
Rational nominal_frame_rate(std::uint32_t sample_rate_hz, std::uint32_t samples_per_frame);

}  // namespace nac::audio
