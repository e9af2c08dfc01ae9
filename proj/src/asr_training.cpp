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


#include "nacasr/asr_training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "nacasr/ops.hpp"
#include "nacasr/optim.hpp"

namespace nac::asr {

using nn::Tensor;
using nn::Var;

void SyntheticLanguageOptions::validate() const {
  const auto n = utf8_to_scalars(symbols).size();
  if (n == 0 || tone_hz.size() != n) {
    throw std::invalid_argument("synthetic language needs one tone per symbol");
  }
  if (symbol_frames == 0 || min_length == 0 || min_length > max_length) {
    throw std::invalid_argument("synthetic language needs positive symbol frames and 0 < min <= max length");
  }
  if (!(amplitude > 0.0 && amplitude < 1.0)) throw std::invalid_argument("amplitude must lie in (0, 1)");
  double distinct = 0.0;
  for (std::size_t len = min_length; len <= max_length && distinct < 1e18; ++len)
    distinct += std::pow(static_cast<double>(n), static_cast<double>(len));
  if (static_cast<double>(utterances) > distinct) {
    throw std::invalid_argument("only " + std::to_string(static_cast<long long>(distinct)) +
                                " distinct transcripts exist for the requested lengths");
  }
}

std::vector<Utterance> make_synthetic_language(const SyntheticLanguageOptions& options,
                                               std::size_t samples_per_frame,
                                               std::uint32_t sample_rate) {
  options.validate();
  const auto symbols = utf8_to_scalars(options.symbols);
  const std::size_t burst = options.symbol_frames * samples_per_frame;
  const std::size_t gap = options.gap_frames * samples_per_frame;

  std::vector<std::vector<double>> tones(symbols.size(), std::vector<double>(burst));
  for (std::size_t s = 0; s < symbols.size(); ++s) {
    for (std::size_t i = 0; i < burst; ++i) {
      tones[s][i] = options.amplitude * std::sin(2.0 * std::numbers::pi * options.tone_hz[s] *
                                                 static_cast<double>(i) / sample_rate);
    }
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> length(options.min_length, options.max_length);
  std::uniform_int_distribution<std::size_t> pick(0, symbols.size() - 1);
  std::set<std::u32string> used;
  std::vector<Utterance> out;
  while (out.size() < options.utterances) {
    std::u32string text(length(rng), U'\0');
    for (auto& c : text) c = symbols[pick(rng)];
    if (!used.insert(text).second) continue;
    Utterance u;
    u.audio.sample_rate_hz = sample_rate;
    u.audio.samples.assign(gap, 0.0);
    for (const char32_t c : text) {
      const auto& tone = tones[symbols.find(c)];
      u.audio.samples.insert(u.audio.samples.end(), tone.begin(), tone.end());
      u.audio.samples.insert(u.audio.samples.end(), gap, 0.0);
    }
    u.transcript = scalars_to_utf8(text);
    out.push_back(std::move(u));
  }
  return out;
}

void AsrConfig::validate() const {
  if (embedding_dim == 0 || hidden == 0) throw std::invalid_argument("asr dimensions must be positive");
  if (!(lr > 0.0) || epochs == 0 || batch_size == 0) {
    throw std::invalid_argument("asr training needs lr > 0, epochs > 0 and batch_size > 0");
  }
  spec_aug.validate();
  noise.validate();
  Vocabulary{vocabulary};
}

AsrModel::AsrModel(const AsrConfig& cfg, std::size_t n_tables, std::size_t table_size)
    : cfg_((cfg.validate(), cfg)),
      vocab_(cfg.vocabulary),
      init_rng_(cfg.seed),
      tables_(register_module<EmbeddingTableSet>("embedding", n_tables, table_size,
                                                 cfg.embedding_dim, init_rng_)),
      acoustic_(register_module<AcousticModel>(
          "acoustic", aggregated_dim(cfg.aggregation, n_tables, cfg.embedding_dim), cfg.hidden,
          vocab_.size(), init_rng_)) {}

std::size_t AsrModel::feature_dim() const {
  return aggregated_dim(cfg_.aggregation, tables_.n_tables(), tables_.dim());
}

Var AsrModel::features(const quant::Codes& codes, nn::Rng& rng, bool training) const {
  const auto augment = [&](Var x) {
    if (cfg_.spec_augment) x = spec_augment(x, cfg_.spec_aug, rng, training);
    return noisy_embedding(x, cfg_.noise.alpha, rng, training);
  };
  Var emb = tables_.embed(codes);
  if (!cfg_.augment_before_aggregation) return augment(aggregate(emb, cfg_.aggregation));
  const nn::Shape shape = emb.shape();
  Var flat = augment(nn::reshape(emb, {shape[0], shape[1] * shape[2]}));
  return aggregate(nn::reshape(flat, shape), cfg_.aggregation);
}

Var AsrModel::forward(const quant::Codes& codes, nn::Rng& rng, bool training) const {
  return acoustic_.forward(features(codes, rng, training));
}

std::string AsrModel::transcribe(const quant::Codes& codes) const {
  nn::Rng unused(0);
  return vocab_.decode(greedy_decode(forward(codes, unused, false).value()));
}

std::vector<AsrExample> encode_utterances(const codec::Codec& model,
                                          const std::vector<Utterance>& utterances) {
  std::vector<AsrExample> out;
  out.reserve(utterances.size());
  for (const auto& u : utterances) out.push_back({model.encode_audio(u.audio), u.transcript});
  return out;
}

std::vector<double> train_asr(AsrModel& model, const std::vector<AsrExample>& data) {
  if (data.empty()) throw std::invalid_argument("asr training set is empty");
  const auto& cfg = model.config();
  std::vector<std::vector<std::int32_t>> labels;
  for (const auto& ex : data) {
    labels.push_back(model.vocabulary().encode(ex.transcript));
    const std::size_t frames = AcousticModel::output_frames(ex.codes.frames);
    if (frames < ctc_min_frames(labels.back())) {
      throw std::invalid_argument("transcript '" + ex.transcript + "' needs " +
                                  std::to_string(ctc_min_frames(labels.back())) +
                                  " output frames, utterance gives " + std::to_string(frames));
    }
  }

  nn::AdamW opt(model.parameters());
  std::vector<std::size_t> order(data.size());
  std::vector<double> epoch_loss;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::seed_seq shuffle_seed{cfg.seed, static_cast<std::uint64_t>(epoch), std::uint64_t{0x5eed}};
    nn::Rng shuffle_rng(shuffle_seed);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      opt.zero_grad();
      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t idx = order[b];
        std::seed_seq element_seed{cfg.seed, static_cast<std::uint64_t>(epoch),
                                   static_cast<std::uint64_t>(idx)};
        nn::Rng rng(element_seed);
        Var loss = ctc_loss(model.forward(data[idx].codes, rng, true), labels[idx]);
        if (!std::isfinite(loss.value()[0])) {
          throw nn::NumericError("asr loss is not finite at epoch " + std::to_string(epoch + 1));
        }
        total += loss.value()[0];
        nn::backward(nn::scale(loss, 1.0 / static_cast<double>(end - begin)));
      }
      opt.step(cfg.lr);
    }
    epoch_loss.push_back(total / static_cast<double>(data.size()));
  }
  return epoch_loss;
}

EvalResult evaluate_asr(const AsrModel& model, const std::vector<AsrExample>& data) {
  EvalResult out;
  for (const auto& ex : data) {
    UtteranceResult r;
    r.reference = ex.transcript;
    r.hypothesis = model.transcribe(ex.codes);
    r.word_errors = wer(r.reference, r.hypothesis);
    r.char_errors = cer(r.reference, r.hypothesis);
    out.word_errors += r.word_errors;
    out.char_errors += r.char_errors;
    out.utterances.push_back(std::move(r));
  }
  return out;
}

}  // namespace nac::asr
