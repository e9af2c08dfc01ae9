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


// Training and evaluation of the toy recognizer on frozen codec codes, and
// the synthetic tone language used to exercise it.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nacasr/asr.hpp"
#include "nacasr/audio.hpp"
#include "nacasr/codec.hpp"

namespace nac::asr {

/// Each symbol is a fixed tone burst; bursts are separated and framed by
/// silence, so every symbol yields the same code pattern wherever it occurs.
struct SyntheticLanguageOptions {
  std::string symbols = "abcde";
  std::vector<double> tone_hz = {250.0, 500.0, 875.0, 1375.0, 2000.0};
  std::size_t symbol_frames = 6;
  std::size_t gap_frames = 2;
  std::size_t min_length = 2;
  std::size_t max_length = 6;
  std::size_t utterances = 200;
  double amplitude = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Utterance {
  audio::AudioSignal audio;
  std::string transcript;
};

/// Pairwise distinct transcripts, so any split of the result holds out
/// whole strings.
std::vector<Utterance> make_synthetic_language(const SyntheticLanguageOptions& options,
                                               std::size_t samples_per_frame,
                                               std::uint32_t sample_rate = 16000);

struct AsrConfig {
  Aggregation aggregation = Aggregation::avg;
  std::size_t embedding_dim = 128;
  bool codebook_init = true;
  bool spec_augment = true;
  SpecAugConfig spec_aug;
  NoisyEmbeddingConfig noise;
  bool augment_before_aggregation = false;
  std::size_t hidden = 64;
  std::string vocabulary = "abcde";
  double lr = 3e-3;
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Embedding tables followed by the acoustic model.
class AsrModel : public nn::Module {
 public:
  AsrModel(const AsrConfig& cfg, std::size_t n_tables, std::size_t table_size);

  const AsrConfig& config() const { return cfg_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  EmbeddingTableSet& tables() { return tables_; }
  const EmbeddingTableSet& tables() const { return tables_; }
  AcousticModel& acoustic() { return acoustic_; }
  std::size_t feature_dim() const;

  /// codes -> embed -> aggregate -> spec_augment -> noisy_embedding, with
  /// the augmentations moved ahead of aggregation when configured.
  nn::Var features(const quant::Codes& codes, nn::Rng& rng, bool training) const;
  nn::Var forward(const quant::Codes& codes, nn::Rng& rng, bool training) const;
  std::string transcribe(const quant::Codes& codes) const;

 private:
  AsrConfig cfg_;
  Vocabulary vocab_;
  nn::Rng init_rng_;
  EmbeddingTableSet& tables_;
  AcousticModel& acoustic_;
};

struct AsrExample {
  quant::Codes codes;
  std::string transcript;
};

std::vector<AsrExample> encode_utterances(const codec::Codec& model,
                                          const std::vector<Utterance>& utterances);

/// Mean CTC loss per epoch. Deterministic given cfg.seed; throws
/// nn::NumericError on a non-finite loss.
std::vector<double> train_asr(AsrModel& model, const std::vector<AsrExample>& data);

struct UtteranceResult {
  std::string reference;
  std::string hypothesis;
  ErrorCount word_errors;
  ErrorCount char_errors;
};

struct EvalResult {
  std::vector<UtteranceResult> utterances;
  ErrorCount word_errors;
  ErrorCount char_errors;
};

EvalResult evaluate_asr(const AsrModel& model, const std::vector<AsrExample>& data);

}  // namespace nac::asr
