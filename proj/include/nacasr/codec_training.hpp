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
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nacasr/audio.hpp"
#include "nacasr/codec.hpp"
#include "nacasr/layers.hpp"

namespace nac::train {

struct LossWeights {
  double time_domain = 0.1;
  double frequency = 1.0;
  double discriminative = 1.0;  // 0 disables the discriminator entirely
  double commitment = 1.0;      // RVQ only
};

struct TrainSchedule {
  double lr0 = 1e-4;
  double gamma = 0.999996;
  std::size_t steps = 200;
  std::size_t batch_size = 1;
  double example_seconds = 1.0;

  void validate() const;
};

/// lr0 * gamma^k.
double lr_at_step(const TrainSchedule& schedule, std::size_t k);

/// mean |x - x_hat|.
nn::Var time_domain_loss(const nn::Var& x, const nn::Var& x_hat);

/// Mean over windows {256, 512, 1024} (hop = window/4; 64, 64, 80 bands)
/// of the mean absolute log-mel difference.
nn::Var frequency_loss(const nn::Var& x, const nn::Var& x_hat);

/// Waveform discriminator: four stride-4 convs (16, 32, 64, 128 channels,
/// kernel 9) with leaky ReLU, then a kernel-3 conv to one logit channel.
class Discriminator : public nn::Module {
 public:
  explicit Discriminator(std::uint64_t seed);

  struct Output {
    std::vector<nn::Var> features;
    nn::Var logits;
  };
  /// x is [1 x L].
  Output forward(const nn::Var& x) const;

 private:
  std::vector<nn::Conv1d*> convs_;
  nn::Conv1d* head_;
};

struct AdversarialTerms {
  nn::Var generator;       // mean((D(x_hat) - 1)^2)
  nn::Var discriminator;   // (mean((D(x) - 1)^2) + mean(D(sg(x_hat))^2)) / 2
  nn::Var feature_match;   // mean over layers of mean |f(x_hat) - sg(f(x))|
};

AdversarialTerms adversarial_losses(const nn::Var& x, const nn::Var& x_hat, const Discriminator& disc);

/// The three LSGAN/feature terms from precomputed discriminator outputs.
AdversarialTerms adversarial_losses(const Discriminator::Output& real,
                                    const Discriminator::Output& fake_for_generator,
                                    const Discriminator::Output& fake_detached);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t step, const std::string& last_good);
  std::size_t step() const { return step_; }
  const std::string& last_good_checkpoint() const { return last_good_; }

 private:
  std::size_t step_;
  std::string last_good_;
};

struct TrainOptions {
  LossWeights weights;
  TrainSchedule schedule;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;          // 0: only at the end
  std::optional<std::filesystem::path> out_dir;  // metrics.tsv and model.nacp
};

/// One row per key per step, in logging order.
struct MetricRecord {
  std::size_t step;
  std::string key;
  double value;
};

struct TrainResult {
  std::vector<MetricRecord> metrics;
  std::vector<double> total_loss;  // per step, index 0 is step 1
  std::vector<double> usage_entropy;

  double metric(std::size_t step, const std::string& key) const;
};

/// Per-step components of the generator objective for one example.
struct GeneratorLosses {
  nn::Var time, frequency, generator, feature_match, commitment, total;
};

GeneratorLosses generator_losses(const nn::Var& x, const nn::Var& x_hat, const nn::Var& commitment,
                                 const Discriminator* disc, const LossWeights& w);

/// Trains `model` end to end on fixed-length examples. Deterministic given
/// options.seed. Throws TrainingDiverged on a non-finite loss.
TrainResult train_codec(codec::Codec& model, const std::vector<audio::AudioSignal>& dataset,
                        const TrainOptions& options);

/// Formats a metric line: "step\tkey\tvalue".
std::string format_metric(const MetricRecord& r);

/// Mean L1 distance between 80-band log-mels of x and y.
double mel_l1_distance(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace nac::train
