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


// TD-NAC (waveform in, waveform out) and Mel-NAC (log-mel in, waveform out).
//
// Latents are [frames x latent_dim]. Waveforms travel as [1 x samples].

#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "nacasr/audio.hpp"
#include "nacasr/checkpoint.hpp"
#include "nacasr/code_stream.hpp"
#include "nacasr/layers.hpp"
#include "nacasr/mel.hpp"
#include "nacasr/quantizers.hpp"

namespace nac::codec {

enum class Family { td, mel };
Family parse_family(const std::string& name);
const char* family_name(Family family);

using stream::QuantizerKind;
QuantizerKind parse_quantizer(const std::string& name);

struct CodecConfig {
  Family family = Family::td;
  QuantizerKind quantizer = QuantizerKind::rvq;
  std::uint32_t sample_rate = 16000;
  std::size_t latent_dim = 128;
  nn::Activation activation = nn::Activation::elu;

  // TD-NAC
  std::vector<std::size_t> downsample_rates = {2, 4, 5, 5};
  std::size_t base_channels = 16;
  std::size_t lstm_layers = 1;

  // Mel-NAC
  std::size_t n_mels = 80;
  std::size_t mel_frame_length = 1024;
  std::size_t hop = 256;
  std::vector<std::size_t> upsample_rates = {8, 4, 4, 2};
  std::size_t hidden_dim = 64;
  std::size_t residual_channels = 128;
  std::size_t residual_blocks = 2;
  std::size_t generator_channels = 64;
  std::size_t bands_per_group = 10;

  // Quantizer
  std::size_t n_codebooks = 8;
  std::size_t codebook_size = 1024;      // RVQ only; FSQ derives it from levels
  std::vector<std::size_t> fsq_levels = {8, 5, 5, 5};

  /// f_down: product of the down- or upsampling rates.
  std::size_t samples_per_frame() const;
  std::size_t effective_codebook_size() const;
  quant::FsqSpec fsq_spec() const;
  Rational frame_rate() const;
  /// Throws std::invalid_argument describing the first inconsistency.
  void validate() const;
};

/// Reference TD-NAC and Mel-NAC configurations with toy widths. `quantizer` picks D_enc 128 / 32.
CodecConfig td_nac_config(QuantizerKind quantizer);
CodecConfig mel_nac_config(QuantizerKind quantizer);

class LatentEncoder : public nn::Module {
 public:
  /// TD: [1 x L] -> [D_enc x L/f_down]; Mel: [n_mels x T] -> [D_enc x T].
  virtual nn::Var forward(const nn::Var& x) const = 0;
};

class WaveDecoder : public nn::Module {
 public:
  /// [D_enc x T] -> [1 x T*f_down].
  virtual nn::Var forward(const nn::Var& z) const = 0;
};

class TdEncoder : public LatentEncoder {
 public:
  TdEncoder(const CodecConfig& cfg, nn::Rng& rng);
  nn::Var forward(const nn::Var& x) const override;

 private:
  struct Stage {
    std::vector<nn::ResidualUnit*> units;
    nn::Conv1d* down;
  };
  nn::Conv1d* conv_in_;
  std::vector<Stage> stages_;
  nn::Lstm* lstm_;
  nn::Conv1d* conv_out_;
  nn::Activation act_;
};

class TdDecoder : public WaveDecoder {
 public:
  TdDecoder(const CodecConfig& cfg, nn::Rng& rng);
  nn::Var forward(const nn::Var& z) const override;

 private:
  struct Stage {
    nn::ConvTranspose1d* up;
    std::vector<nn::ResidualUnit*> units;
  };
  nn::Conv1d* conv_in_;
  nn::Lstm* lstm_;
  std::vector<Stage> stages_;
  nn::Conv1d* conv_out_;
  nn::Activation act_;
};

/// Residual mel encoder. With FSQ there is one encoder per group of
/// bands_per_group mel bands, each emitting latent_dim / n_groups dims;
/// outputs are concatenated in ascending group order.
class MelEncoder : public LatentEncoder {
 public:
  MelEncoder(const CodecConfig& cfg, nn::Rng& rng);
  nn::Var forward(const nn::Var& mel) const override;

 private:
  class Branch : public nn::Module {
   public:
    Branch(std::size_t in, std::size_t out, const CodecConfig& cfg, nn::Rng& rng);
    nn::Var forward(const nn::Var& x) const;

   private:
    nn::Conv1d& conv_in_;
    std::vector<nn::ResidualUnit*> blocks_;
    nn::Conv1d* conv_out_;
    nn::Activation act_;
  };
  std::vector<Branch*> branches_;
  std::size_t bands_per_branch_;
};

/// Generator in the HiFi-GAN layout: conv, then per rate u a leaky-ReLU,
/// a transposed conv (kernel 2u, stride u) halving channels, and a
/// residual unit; leaky-ReLU, conv to one channel, tanh.
class MelGenerator : public WaveDecoder {
 public:
  MelGenerator(const CodecConfig& cfg, nn::Rng& rng);
  nn::Var forward(const nn::Var& z) const override;

 private:
  struct Stage {
    nn::ConvTranspose1d* up;
    std::vector<nn::ResidualUnit*> units;
  };
  nn::Conv1d* conv_in_;
  std::vector<Stage> stages_;
  nn::Conv1d* conv_out_;
};

struct QuantizedLatents {
  nn::Var latents;     // straight-through quantized latents, [T x D_enc]
  quant::Codes codes;
  nn::Var commitment;  // RVQ: mean((z - sg(z_hat))^2); FSQ: undefined
};

class Codec : public nn::Module {
 public:
  Codec(const CodecConfig& cfg, std::uint64_t seed);

  const CodecConfig& config() const { return cfg_; }
  quant::CodebookSet& codebooks() { return books_; }
  const quant::CodebookSet& codebooks() const { return books_; }
  LatentEncoder& encoder() { return *encoder_; }
  WaveDecoder& decoder() { return *decoder_; }

  /// Length the encoder path needs for `samples` input samples.
  std::size_t padded_length(std::size_t samples) const;
  /// Frames produced for `samples` input samples after padding.
  std::size_t frame_count(std::size_t samples) const;

  /// Encoder input for a waveform: TD requires a multiple of f_down and
  /// returns [1 x L]; Mel pads (left 384, total 256*T + 768 for
  /// T = ceil(L/256)) and returns the [n_mels x T] log-mel.
  nn::Tensor prepare(const std::vector<double>& samples) const;
  /// Pads a waveform to padded_length (TD: zeros on the right; Mel: the
  /// analysis padding described above).
  std::vector<double> pad(const std::vector<double>& samples) const;

  /// [T x D_enc] latents of a prepared input.
  nn::Var encode(const nn::Var& input) const;
  /// [1 x T*f_down] waveform of [T x D_enc] latents.
  nn::Var decode(const nn::Var& latents) const;

  quant::Codes quantize(const nn::Tensor& latents) const;
  nn::Tensor dequantize(const quant::Codes& codes) const;
  QuantizedLatents quantize_train(const nn::Var& latents) const;

  quant::Codes encode_audio(const audio::AudioSignal& signal) const;
  audio::AudioSignal decode_audio(const quant::Codes& codes, std::size_t original_length) const;
  audio::AudioSignal roundtrip(const audio::AudioSignal& signal) const;

  stream::CodeStream make_stream(const audio::AudioSignal& signal) const;
  /// Checks stream metadata against this model; throws std::invalid_argument.
  void check_stream(const stream::CodeStreamHeader& header) const;

  /// Module parameters plus "rvq.book{i}" and "rvq.usage{i}".
  std::vector<nn::NamedTensor> state();
  void load_state(const std::vector<nn::NamedTensor>& records);

 private:
  CodecConfig cfg_;
  LatentEncoder* encoder_;
  WaveDecoder* decoder_;
  quant::CodebookSet books_;
};

}  // namespace nac::codec
