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

// STFT and mel filterbank front end.
//
// Framing has no padding: a signal of length L >= frame_length yields
// 1 + (L - frame_length) / hop frames. Each frame is Hann-windowed
// (periodic), transformed with a real FFT, and the magnitudes are pooled by
// triangular filters spaced on the Slaney mel scale between 0 Hz and
// Nyquist. Filters peak at 1 and are not area-normalized.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nacasr/audio.hpp"
#include "nacasr/autograd.hpp"
#include "nacasr/rational.hpp"

namespace nac::audio {

struct MelConfig {
  std::uint32_t sample_rate_hz = 16000;
  std::size_t frame_length = 1024;  // also the FFT size
  std::size_t hop = 256;
  std::size_t n_mels = 80;
  double floor_eps = 1e-5;
};

struct MelSpectrogram {
  std::size_t n_frames = 0;
  std::size_t n_mels = 0;
  std::vector<double> values;  // [n_frames x n_mels], natural log
  std::size_t frame_length = 0;
  std::size_t hop = 0;
  Rational nominal_frame_rate_hz;

  double at(std::size_t frame, std::size_t band) const { return values[frame * n_mels + band]; }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Center frequencies (Hz) of the n_mels filters.
std::vector<double> mel_center_frequencies(std::size_t n_mels, std::uint32_t sample_rate_hz);

/// [n_mels x (n_fft/2 + 1)] triangular weights.
nn::Tensor mel_filterbank(std::size_t n_mels, std::size_t n_fft, std::uint32_t sample_rate_hz);

std::vector<double> hann_window(std::size_t n);

/// 1 + (length - frame_length) / hop; throws when length < frame_length.
std::size_t stft_frame_count(std::size_t length, std::size_t frame_length, std::size_t hop);

/// [frames x (frame_length/2 + 1)] magnitudes of the windowed real FFT.
nn::Tensor stft_magnitude(std::span<const double> samples, std::size_t frame_length,
                          std::size_t hop);

/// 80-band log-mel spectrogram of the signal under `config`.
MelSpectrogram mel_spectrogram(const AudioSignal& signal, const MelConfig& config = {});
MelSpectrogram mel_spectrogram(std::span<const double> samples, const MelConfig& config);

/// Differentiable log-mel of a waveform held as [1 x L] or [L];
/// returns [frames x n_mels].
nn::Var log_mel(const nn::Var& waveform, const MelConfig& config);

}  // namespace nac::audio
