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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "grad_check.hpp"
#include "nacasr/codec.hpp"
#include "nacasr/ops.hpp"

using namespace nac;
using codec::Codec;
using codec::CodecConfig;
using codec::QuantizerKind;

namespace {

CodecConfig small_td(QuantizerKind q) {
  auto c = codec::td_nac_config(q);
  c.base_channels = 4;
  c.codebook_size = 64;
  return c;
}

CodecConfig small_mel(QuantizerKind q) {
  auto c = codec::mel_nac_config(q);
  c.hidden_dim = 16;
  c.residual_channels = 16;
  c.residual_blocks = 1;
  c.generator_channels = 32;
  c.codebook_size = 64;
  return c;
}

audio::AudioSignal tone(std::size_t n, double hz = 440.0) {
  audio::AudioSignal s;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * hz * i / 16000.0);
  return s;
}

}  // namespace

TEST_CASE("config: reference constants and validation") {
  auto td = codec::td_nac_config(QuantizerKind::rvq);
  CHECK(td.samples_per_frame() == 200);
  CHECK(td.frame_rate() == Rational(80));
  CHECK(td.latent_dim == 128);
  CHECK(codec::td_nac_config(QuantizerKind::fsq).latent_dim == 32);
  auto mel = codec::mel_nac_config(QuantizerKind::fsq);
  CHECK(mel.samples_per_frame() == 256);
  CHECK(mel.frame_rate().to_double() == 62.5);
  CHECK(mel.effective_codebook_size() == 1000);
  CHECK(mel.n_codebooks * mel.bands_per_group == 80);
  mel.upsample_rates = {8, 4, 4, 4};
  CHECK_THROWS_AS(mel.validate(), std::invalid_argument);
  auto bad = codec::td_nac_config(QuantizerKind::fsq);
  bad.latent_dim = 30;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("td: 1 s gives 80 frames, 200 samples give 1, 201 is rejected") {
  Codec model(small_td(QuantizerKind::rvq), 1);
  auto one_second = model.encode(nn::Var(model.prepare(tone(16000).samples)));
  CHECK(one_second.shape() == nn::Shape{80, 128});
  CHECK(model.encode(nn::Var(model.prepare(tone(200).samples))).shape() == nn::Shape{1, 128});
  CHECK_THROWS_WITH_AS(model.prepare(tone(201).samples), doctest::Contains("pad"), std::invalid_argument);
  CHECK(model.decode(one_second).shape() == nn::Shape{1, 16000});
  CHECK(model.decode(nn::Var(nn::Tensor({1, 128}))).shape() == nn::Shape{1, 200});
  CHECK_THROWS_AS(model.decode(nn::Var(nn::Tensor({3, 127}))), nn::ShapeError);
}

TEST_CASE("td and mel: round-trip length identity over a sweep") {
  Codec td(small_td(QuantizerKind::fsq), 2);
  Codec mel(small_mel(QuantizerKind::rvq), 3);
  for (std::size_t n : {1u, 199u, 200u, 201u, 255u, 256u, 257u, 1000u, 1999u, 4000u}) {
    const auto x = tone(n);
    CHECK(td.roundtrip(x).samples.size() == n);
    CHECK(mel.roundtrip(x).samples.size() == n);
    CHECK(td.encode_audio(x).frames == (n + 199) / 200);
    CHECK(mel.encode_audio(x).frames == (n + 255) / 256);
  }
}

TEST_CASE("mel: T frames in, T latents out, 256 T samples decoded") {
  Codec model(small_mel(QuantizerKind::rvq), 4);
  std::mt19937_64 rng(0);
  for (std::size_t T : {1u, 3u, 10u}) {
    auto z = model.encode(nn::Var(testing::random_tensor({80, T}, rng)));
    CHECK(z.shape() == nn::Shape{T, 128});
    CHECK(model.decode(z).shape() == nn::Shape{1, 256 * T});
  }
  CHECK_THROWS_AS(model.encode(nn::Var(nn::Tensor({64, 5}))), nn::ShapeError);
  CHECK(model.config().upsample_rates[0] * model.config().upsample_rates[1] *
            model.config().upsample_rates[2] * model.config().upsample_rates[3] ==
        256);
}

TEST_CASE("mel fsq: perturbing band 5 moves only the group-0 latent slice") {
  Codec model(small_mel(QuantizerKind::fsq), 5);
  std::mt19937_64 rng(1);
  auto mel = testing::random_tensor({80, 6}, rng);
  const auto base = model.encode(nn::Var(mel)).value();
  for (std::size_t t = 0; t < 6; ++t) mel.at(5, t) += 1.0;
  const auto moved = model.encode(nn::Var(mel)).value();
  bool group0_changed = false;
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t d = 0; d < 32; ++d) {
      if (d < 4) {
        group0_changed |= moved.at(t, d) != base.at(t, d);
      } else {
        CHECK(moved.at(t, d) == base.at(t, d));
      }
    }
  }
  CHECK(group0_changed);
}

TEST_CASE("mel: zero input gives a latent constant over time") {
  Codec model(small_mel(QuantizerKind::rvq), 6);
  const auto z = model.encode(nn::Var(nn::Tensor({80, 7}, 0.0))).value();
  for (std::size_t t = 1; t < 7; ++t) {
    for (std::size_t d = 0; d < 128; ++d) CHECK(z.at(t, d) == z.at(0, d));
  }
}

TEST_CASE("gradients reach every encoder and decoder parameter") {
  for (auto cfg : {small_td(QuantizerKind::rvq), small_td(QuantizerKind::fsq),
                   small_mel(QuantizerKind::rvq), small_mel(QuantizerKind::fsq)}) {
    cfg.residual_blocks = 1;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Codec model(cfg, seed);
      std::mt19937_64 rng(seed);
      const auto x = testing::random_tensor({1, 1200}, rng, -0.5, 0.5);
      auto input = model.prepare(x.storage());
      auto q = model.quantize_train(model.encode(nn::Var(input)));
      auto y = model.decode(q.latents);
      auto target = nn::constant(testing::random_tensor(y.shape(), rng, -0.5, 0.5));
      nn::Var loss = nn::l1_loss(y, target);
      if (q.commitment.defined()) loss = nn::add(loss, q.commitment);
      model.zero_grad();
      nn::backward(loss);
      for (auto& [name, p] : model.named_parameters()) {
        double mag = 0.0;
        for (double g : p->grad().data()) mag += std::abs(g);
        INFO(codec::family_name(cfg.family), " ", name, " seed ", seed);
        CHECK(mag > 0.0);
      }
    }
  }
}

TEST_CASE("codes stay in range and state round-trips through a checkpoint") {
  for (auto cfg : {small_td(QuantizerKind::rvq), small_mel(QuantizerKind::fsq)}) {
    Codec a(cfg, 7);
    auto s = a.make_stream(tone(3000));
    quant::check_code_range(s.codes, cfg.effective_codebook_size());
    CHECK(s.header.original_sample_count == 3000);
    a.check_stream(s.header);

    const auto bytes = nn::encode_checkpoint(a.state());
    Codec b(cfg, 99), c(cfg, 100);
    b.load_state(nn::decode_checkpoint(bytes));
    c.load_state(nn::decode_checkpoint(bytes));
    CHECK(b.roundtrip(tone(1000)).samples == c.roundtrip(tone(1000)).samples);
  }
  Codec td(small_td(QuantizerKind::rvq), 1);
  Codec fsq(small_td(QuantizerKind::fsq), 1);
  auto s = fsq.make_stream(tone(400));
  CHECK_THROWS_WITH_AS(td.check_stream(s.header), doctest::Contains("quantizer"), std::invalid_argument);
}

TEST_CASE("determinism: same seed, same outputs") {
  Codec a(small_td(QuantizerKind::rvq), 42), b(small_td(QuantizerKind::rvq), 42);
  CHECK(a.roundtrip(tone(2000)).samples == b.roundtrip(tone(2000)).samples);
  CHECK(a.encode_audio(tone(2000)) == b.encode_audio(tone(2000)));
}
