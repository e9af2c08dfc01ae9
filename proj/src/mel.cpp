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

#include "nacasr/mel.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "nacasr/kernels.hpp"

namespace nac::audio {
namespace {

constexpr double kLinearHzPerMel = 200.0 / 3.0;
constexpr double kLogStartHz = 1000.0;
constexpr double kLogStartMel = kLogStartHz / kLinearHzPerMel;  // 15
const double kLogStep = std::log(6.4) / 27.0;

// FFTW plans are created once per size; planning is not thread-safe but
// executing a finished plan on fresh arrays is.
struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

const FftPlans& plans_for(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<FftPlans>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) {
    slot = std::make_unique<FftPlans>();
    std::vector<double> real(n);
    std::vector<fftw_complex> spec(n / 2 + 1);
    const int size = static_cast<int>(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    slot->forward = fftw_plan_dft_r2c_1d(size, real.data(), spec.data(), flags);
    slot->inverse = fftw_plan_dft_c2r_1d(size, spec.data(), real.data(), flags);
  }
  return *slot;
}

// Per-frame spectra of a waveform, kept for the backward pass.
struct Spectra {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> re, im, mag;  // [frames x bins]
};

Spectra analyze(std::span<const double> samples, std::size_t frame_length, std::size_t hop) {
  Spectra s;
  s.frames = stft_frame_count(samples.size(), frame_length, hop);
  s.bins = frame_length / 2 + 1;
  s.re.resize(s.frames * s.bins);
  s.im.resize(s.frames * s.bins);
  s.mag.resize(s.frames * s.bins);
  const auto window = hann_window(frame_length);
  const FftPlans& plans = plans_for(frame_length);
  const auto n_frames = static_cast<std::ptrdiff_t>(s.frames);
#pragma omp parallel
  {
    std::vector<double> buf(frame_length);
    std::vector<fftw_complex> spec(s.bins);
#pragma omp for schedule(static)
    for (std::ptrdiff_t ff = 0; ff < n_frames; ++ff) {
      const auto f = static_cast<std::size_t>(ff);
      for (std::size_t n = 0; n < frame_length; ++n) buf[n] = samples[f * hop + n] * window[n];
      fftw_execute_dft_r2c(plans.forward, buf.data(), spec.data());
      for (std::size_t k = 0; k < s.bins; ++k) {
        const double re = spec[k][0], im = spec[k][1];
        s.re[f * s.bins + k] = re;
        s.im[f * s.bins + k] = im;
        s.mag[f * s.bins + k] = std::sqrt(re * re + im * im);
      }
    }
  }
  return s;
}

}  // namespace

double hz_to_mel(double hz) {
  if (hz < kLogStartHz) return hz / kLinearHzPerMel;
  return kLogStartMel + std::log(hz / kLogStartHz) / kLogStep;
}

double mel_to_hz(double mel) {
  if (mel < kLogStartMel) return mel * kLinearHzPerMel;
  return kLogStartHz * std::exp(kLogStep * (mel - kLogStartMel));
}

namespace {
std::vector<double> mel_edges_hz(std::size_t n_mels, std::uint32_t sample_rate_hz) {
  const double top = hz_to_mel(sample_rate_hz / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  return edges;
}
}  // namespace

std::vector<double> mel_center_frequencies(std::size_t n_mels, std::uint32_t sample_rate_hz) {
  auto edges = mel_edges_hz(n_mels, sample_rate_hz);
  return {edges.begin() + 1, edges.end() - 1};
}

nn::Tensor mel_filterbank(std::size_t n_mels, std::size_t n_fft, std::uint32_t sample_rate_hz) {
  const std::size_t bins = n_fft / 2 + 1;
  const auto edges = mel_edges_hz(n_mels, sample_rate_hz);
  nn::Tensor fb({n_mels, bins}, 0.0);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate_hz / static_cast<double>(n_fft);
      const double rising = (f - lo) / (center - lo);
      const double falling = (hi - f) / (hi - center);
      fb[m * bins + k] = std::max(0.0, std::min(rising, falling));
    }
  }
  return fb;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

std::size_t stft_frame_count(std::size_t length, std::size_t frame_length, std::size_t hop) {
  if (hop == 0) throw std::invalid_argument("STFT hop must be positive");
  if (length < frame_length) {
    throw std::invalid_argument("signal of " + std::to_string(length) +
                                " samples is shorter than one frame (" +
                                std::to_string(frame_length) + ")");
  }
  return 1 + (length - frame_length) / hop;
}

nn::Tensor stft_magnitude(std::span<const double> samples, std::size_t frame_length,
                          std::size_t hop) {
  auto s = analyze(samples, frame_length, hop);
  return nn::Tensor({s.frames, s.bins}, std::move(s.mag));
}

MelSpectrogram mel_spectrogram(std::span<const double> samples, const MelConfig& config) {
  const auto spectra = analyze(samples, config.frame_length, config.hop);
  const auto fb = mel_filterbank(config.n_mels, config.frame_length, config.sample_rate_hz);
  MelSpectrogram out;
  out.n_frames = spectra.frames;
  out.n_mels = config.n_mels;
  out.frame_length = config.frame_length;
  out.hop = config.hop;
  out.nominal_frame_rate_hz =
      nominal_frame_rate(config.sample_rate_hz, static_cast<std::uint32_t>(config.hop));
  out.values.assign(out.n_frames * out.n_mels, 0.0);
  kernels::matmul_nt(spectra.frames, spectra.bins, config.n_mels, spectra.mag, fb.data(),
                     out.values);
  for (auto& v : out.values) v = std::log(v + config.floor_eps);
  return out;
}

MelSpectrogram mel_spectrogram(const AudioSignal& signal, const MelConfig& config) {
  signal.validate();
  if (signal.sample_rate_hz != config.sample_rate_hz) {
    throw std::invalid_argument("signal rate " + std::to_string(signal.sample_rate_hz) +
                                " Hz does not match mel config rate " +
                                std::to_string(config.sample_rate_hz) + " Hz");
  }
  return mel_spectrogram(signal.samples, config);
}

nn::Var log_mel(const nn::Var& waveform, const MelConfig& config) {
  const auto& x = waveform.value();
  if (!(x.rank() == 1 || (x.rank() == 2 && x.dim(0) == 1))) {
    throw nn::ShapeError("log_mel: waveform must be [L] or [1 x L], got " +
                         nn::shape_to_string(x.shape()));
  }
  auto spectra = analyze(x.data(), config.frame_length, config.hop);
  auto fb = mel_filterbank(config.n_mels, config.frame_length, config.sample_rate_hz);
  const std::size_t frames = spectra.frames, bins = spectra.bins, n_mels = config.n_mels;
  std::vector<double> mel(frames * n_mels, 0.0);
  kernels::matmul_nt(frames, bins, n_mels, spectra.mag, fb.data(), mel);
  nn::Tensor out({frames, n_mels});
  for (std::size_t i = 0; i < mel.size(); ++i) out[i] = std::log(mel[i] + config.floor_eps);

  return nn::make_result(
      std::move(out), {waveform},
      [config, spectra = std::move(spectra), fb = std::move(fb), mel = std::move(mel)](nn::Node& self) {
        nn::Node& parent = *self.parents[0];
        if (!parent.requires_grad) return;
        const std::size_t frames = spectra.frames, bins = spectra.bins, n_mels = config.n_mels;
        const std::size_t n = config.frame_length;
        std::vector<double> g_mel(frames * n_mels);
        for (std::size_t i = 0; i < g_mel.size(); ++i) g_mel[i] = self.grad[i] / (mel[i] + config.floor_eps);
        std::vector<double> g_mag(frames * bins, 0.0);
        kernels::matmul_nn(frames, n_mels, bins, g_mel, fb.data(), g_mag);

        const auto window = hann_window(n);
        const FftPlans& plans = plans_for(n);
        nn::Tensor& gx = parent.grad_buffer();
        std::vector<fftw_complex> spec(bins);
        std::vector<double> buf(n);
        // Frames overlap, so accumulate serially in frame order.
        for (std::size_t f = 0; f < frames; ++f) {
          for (std::size_t k = 0; k < bins; ++k) {
            const std::size_t idx = f * bins + k;
            const double m = spectra.mag[idx];
            double gre = 0.0, gim = 0.0;
            if (m > 0.0) {
              gre = g_mag[idx] * spectra.re[idx] / m;
              gim = g_mag[idx] * spectra.im[idx] / m;
            }
            // d/dx_n = w_n * Re(sum_k G_k e^{+i 2 pi k n / N}); the c2r
            // transform doubles interior bins, so halve them here.
            const bool edge = (k == 0 || k == bins - 1);
            spec[k][0] = edge ? gre : 0.5 * gre;
            spec[k][1] = edge ? 0.0 : 0.5 * gim;
          }
          fftw_execute_dft_c2r(plans.inverse, spec.data(), buf.data());
          for (std::size_t i = 0; i < n; ++i) gx[f * config.hop + i] += window[i] * buf[i];
        }
      });
}

}  // namespace nac::audio
