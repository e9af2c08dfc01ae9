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


#include "nacasr/codec_training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "nacasr/checkpoint.hpp"
#include "nacasr/mel.hpp"
#include "nacasr/ops.hpp"
#include "nacasr/optim.hpp"

namespace nac::train {

void TrainSchedule::validate() const {
  if (!(lr0 > 0.0)) throw std::invalid_argument("lr0 must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (steps == 0) throw std::invalid_argument("steps must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(example_seconds > 0.0)) throw std::invalid_argument("example_seconds must be positive");
}

double lr_at_step(const TrainSchedule& schedule, std::size_t k) {
  return schedule.lr0 * std::pow(schedule.gamma, static_cast<double>(k));
}

nn::Var time_domain_loss(const nn::Var& x, const nn::Var& x_hat) {
  if (x.numel() != x_hat.numel()) {
    throw nn::ShapeError("time-domain loss: " + std::to_string(x.numel()) + " vs " +
                         std::to_string(x_hat.numel()) + " samples");
  }
  return nn::l1_loss(x_hat, nn::reshape(x, x_hat.shape()));
}

nn::Var frequency_loss(const nn::Var& x, const nn::Var& x_hat) {
  if (x.numel() != x_hat.numel()) {
    throw nn::ShapeError("frequency loss: " + std::to_string(x.numel()) + " vs " +
                         std::to_string(x_hat.numel()) + " samples");
  }
  if (x.numel() < 1024) {
    throw std::invalid_argument("frequency loss needs at least 1024 samples, got " +
                                std::to_string(x.numel()));
  }
  struct Scale {
    std::size_t window, bands;
  };
  nn::Var total;
  for (const Scale s : {Scale{256, 64}, Scale{512, 64}, Scale{1024, 80}}) {
    audio::MelConfig cfg{16000, s.window, s.window / 4, s.bands, 1e-5};
    nn::Var term = nn::l1_loss(audio::log_mel(x_hat, cfg), audio::log_mel(x, cfg));
    total = total.defined() ? nn::add(total, term) : term;
  }
  return nn::scale(total, 1.0 / 3.0);
}

// ---------------------------------------------------------------------------

Discriminator::Discriminator(std::uint64_t seed) {
  nn::Rng rng(seed);
  std::size_t in = 1;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t out = std::size_t{16} << i;
    convs_.push_back(&register_module<nn::Conv1d>("conv" + std::to_string(i), in, out, 9, rng,
                                                  nn::ConvOptions{4, 1, 4, 4}));
    in = out;
  }
  head_ = &register_module<nn::Conv1d>("head", in, 1, 3, rng, nn::Conv1d::same(3));
}

Discriminator::Output Discriminator::forward(const nn::Var& x) const {
  Output out;
  nn::Var h = x;
  for (const auto* conv : convs_) {
    h = nn::leaky_relu(conv->forward(h), 0.2);
    out.features.push_back(h);
  }
  out.logits = head_->forward(h);
  return out;
}

AdversarialTerms adversarial_losses(const Discriminator::Output& real,
                                    const Discriminator::Output& fake_for_generator,
                                    const Discriminator::Output& fake_detached) {
  AdversarialTerms t;
  t.generator = nn::mean(nn::square(nn::add_scalar(fake_for_generator.logits, -1.0)));
  t.discriminator = nn::scale(nn::add(nn::mean(nn::square(nn::add_scalar(real.logits, -1.0))),
                                      nn::mean(nn::square(fake_detached.logits))),
                              0.5);
  nn::Var fm;
  for (std::size_t i = 0; i < real.features.size(); ++i) {
    nn::Var term = nn::l1_loss(fake_for_generator.features[i], nn::detach(real.features[i]));
    fm = fm.defined() ? nn::add(fm, term) : term;
  }
  t.feature_match = nn::scale(fm, 1.0 / static_cast<double>(real.features.size()));
  return t;
}

AdversarialTerms adversarial_losses(const nn::Var& x, const nn::Var& x_hat, const Discriminator& disc) {
  const auto real = disc.forward(nn::reshape(x, x_hat.shape()));
  const auto fake = disc.forward(x_hat);
  const auto fake_detached = disc.forward(nn::detach(x_hat));
  return adversarial_losses(real, fake, fake_detached);
}

GeneratorLosses generator_losses(const nn::Var& x, const nn::Var& x_hat, const nn::Var& commitment,
                                 const Discriminator* disc, const LossWeights& w) {
  GeneratorLosses l;
  l.time = time_domain_loss(x, x_hat);
  l.frequency = frequency_loss(x, x_hat);
  l.total = nn::add(nn::scale(l.time, w.time_domain), nn::scale(l.frequency, w.frequency));
  if (disc && w.discriminative > 0.0) {
    const auto real = disc->forward(nn::reshape(x, x_hat.shape()));
    const auto fake = disc->forward(x_hat);
    const auto t = adversarial_losses(real, fake, fake);
    l.generator = t.generator;
    l.feature_match = t.feature_match;
    l.total = nn::add(l.total, nn::scale(nn::add(l.generator, l.feature_match), w.discriminative));
  }
  if (commitment.defined()) {
    l.commitment = commitment;
    l.total = nn::add(l.total, nn::scale(commitment, w.commitment));
  }
  return l;
}

// ---------------------------------------------------------------------------

TrainingDiverged::TrainingDiverged(std::size_t step, const std::string& last_good)
    : std::runtime_error("non-finite loss at step " + std::to_string(step) + "; last good checkpoint: " +
                         (last_good.empty() ? std::string("none") : last_good)),
      step_(step),
      last_good_(last_good) {}

double TrainResult::metric(std::size_t step, const std::string& key) const {
  for (const auto& r : metrics) {
    if (r.step == step && r.key == key) return r.value;
  }
  throw std::out_of_range("no metric " + key + " at step " + std::to_string(step));
}

std::string format_metric(const MetricRecord& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", r.value);
  return std::to_string(r.step) + "\t" + r.key + "\t" + buf;
}

double mel_l1_distance(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("mel distance needs equal lengths");
  const auto a = audio::mel_spectrogram(x, audio::MelConfig{});
  const auto b = audio::mel_spectrogram(y, audio::MelConfig{});
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += std::abs(a.values[i] - b.values[i]);
  return s / static_cast<double>(a.values.size());
}

namespace {

void save_training_checkpoint(const std::filesystem::path& path, codec::Codec& model,
                              Discriminator* disc) {
  auto records = model.state();
  if (disc) {
    for (auto& r : nn::module_records(*disc, "discriminator.")) records.push_back(std::move(r));
  }
  const auto tmp = path.string() + ".tmp";
  nn::write_checkpoint(tmp, records);
  std::filesystem::rename(tmp, path);
}

}  // namespace

TrainResult train_codec(codec::Codec& model, const std::vector<audio::AudioSignal>& dataset,
                        const TrainOptions& options) {
  const auto& sched = options.schedule;
  const auto& w = options.weights;
  sched.validate();
  if (w.time_domain < 0 || w.frequency < 0 || w.discriminative < 0 || w.commitment < 0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
  if (dataset.empty()) throw std::invalid_argument("training set is empty");
  const std::size_t length = dataset.front().samples.size();
  for (const auto& ex : dataset) {
    ex.validate();
    if (ex.samples.size() != length) throw std::invalid_argument("training examples differ in length");
  }
  const auto& cfg = model.config();
  const bool is_rvq = cfg.quantizer == codec::QuantizerKind::rvq;

  std::optional<Discriminator> disc_storage;
  Discriminator* disc = nullptr;
  if (w.discriminative > 0.0) {
    disc_storage.emplace(options.seed ^ 0x5eedd15cULL);
    disc = &*disc_storage;
  }
  nn::AdamW gen_opt(model.parameters());
  std::optional<nn::AdamW> disc_opt;
  if (disc) disc_opt.emplace(disc->parameters());

  nn::Rng rng(options.seed);
  std::vector<std::size_t> order(dataset.size());
  std::size_t cursor = order.size();
  auto next_example = [&]() -> const audio::AudioSignal& {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    return dataset[order[cursor++]];
  };

  std::ofstream log;
  std::filesystem::path ckpt_path;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    log.open(*options.out_dir / "metrics.tsv", std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write " + (*options.out_dir / "metrics.tsv").string());
    ckpt_path = *options.out_dir / "model.nacp";
  }
  std::string last_good;

  TrainResult result;
  auto record = [&](std::size_t step, const std::string& key, double value) {
    result.metrics.push_back({step, key, value});
    if (log) log << format_metric(result.metrics.back()) << '\n';
  };

  for (std::size_t step = 1; step <= sched.steps; ++step) {
    const double lr = lr_at_step(sched, step - 1);
    std::vector<const audio::AudioSignal*> batch;
    for (std::size_t b = 0; b < sched.batch_size; ++b) batch.push_back(&next_example());
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    model.zero_grad();
    if (disc) disc->zero_grad();

    std::vector<nn::Tensor> inputs;
    for (const auto* ex : batch) inputs.push_back(model.prepare(ex->samples));

    if (is_rvq && step == 1) {
      std::vector<double> rows;
      for (const auto& in : inputs) {
        const auto z = model.encode(nn::Var(in)).value();
        rows.insert(rows.end(), z.data().begin(), z.data().end());
      }
      const std::size_t n = rows.size() / cfg.latent_dim;
      quant::rvq_init_from_batch(model.codebooks(), nn::Tensor({n, cfg.latent_dim}, std::move(rows)), rng);
    }

    double m_time = 0, m_freq = 0, m_gen = 0, m_fm = 0, m_commit = 0, m_total = 0;
    std::vector<nn::Tensor> fakes;
    std::vector<double> batch_latents;
    quant::Codes batch_codes(0, cfg.n_codebooks);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& samples = batch[b]->samples;
      nn::Var x(nn::Tensor({1, samples.size()}, samples));
      nn::Var z = model.encode(nn::Var(inputs[b]));
      auto q = model.quantize_train(z);
      nn::Var x_hat = model.decode(q.latents);
      if (x_hat.dim(1) != samples.size()) x_hat = nn::slice_cols(x_hat, 0, samples.size());
      auto losses = generator_losses(x, x_hat, q.commitment, disc, w);
      const double total = losses.total.value().item();
      if (!std::isfinite(total)) throw TrainingDiverged(step, last_good);
      nn::backward(nn::scale(losses.total, inv_b));

      m_time += losses.time.value().item() * inv_b;
      m_freq += losses.frequency.value().item() * inv_b;
      if (losses.generator.defined()) m_gen += losses.generator.value().item() * inv_b;
      if (losses.feature_match.defined()) m_fm += losses.feature_match.value().item() * inv_b;
      if (losses.commitment.defined()) m_commit += losses.commitment.value().item() * inv_b;
      m_total += total * inv_b;
      fakes.push_back(x_hat.value());
      batch_latents.insert(batch_latents.end(), z.value().data().begin(), z.value().data().end());
      batch_codes.values.insert(batch_codes.values.end(), q.codes.values.begin(), q.codes.values.end());
      batch_codes.frames += q.codes.frames;
    }
    gen_opt.step(lr);

    if (is_rvq) {
      const std::size_t n = batch_latents.size() / cfg.latent_dim;
      quant::rvq_train_update(model.codebooks(),
                              nn::Tensor({n, cfg.latent_dim}, std::move(batch_latents)), batch_codes, rng);
    }

    double m_disc = 0.0;
    if (disc) {
      disc->zero_grad();
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& samples = batch[b]->samples;
        nn::Var x(nn::Tensor({1, samples.size()}, samples));
        const auto real = disc->forward(x);
        const auto fake = disc->forward(nn::Var(fakes[b]));
        auto terms = adversarial_losses(real, fake, fake);
        const double d = terms.discriminator.value().item();
        if (!std::isfinite(d)) throw TrainingDiverged(step, last_good);
        nn::backward(nn::scale(terms.discriminator, inv_b));
        m_disc += d * inv_b;
      }
      disc_opt->step(lr);
    }

    double entropy = 0.0;
    for (std::size_t i = 0; i < cfg.n_codebooks; ++i) {
      entropy += quant::usage_entropy_bits(batch_codes, i, cfg.effective_codebook_size());
    }
    entropy /= static_cast<double>(cfg.n_codebooks);

    record(step, "lr", lr);
    record(step, "loss_time", m_time);
    record(step, "loss_frequency", m_freq);
    if (disc) {
      record(step, "loss_generator", m_gen);
      record(step, "loss_feature_match", m_fm);
      record(step, "loss_discriminator", m_disc);
    }
    if (is_rvq) record(step, "loss_commitment", m_commit);
    record(step, "loss_total", m_total);
    record(step, "usage_entropy_bits", entropy);
    result.total_loss.push_back(m_total);
    result.usage_entropy.push_back(entropy);

    const bool due = options.checkpoint_every > 0 && step % options.checkpoint_every == 0;
    if (options.out_dir && (due || step == sched.steps)) {
      save_training_checkpoint(ckpt_path, model, disc);
      last_good = ckpt_path.string() + " (step " + std::to_string(step) + ")";
    }
  }
  if (log) log.flush();
  return result;
}

}  // namespace nac::train
