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
#include <random>
#include <set>

#include "ctc_oracle.hpp"
#include "grad_check.hpp"
#include "nacasr/asr.hpp"
#include "nacasr/asr_training.hpp"
#include "nacasr/ops.hpp"
#include "nacasr/optim.hpp"

using namespace nac;
using asr::Aggregation;
using nn::Tensor;
using nn::Var;

namespace {

quant::Codes random_codes(std::size_t frames, std::size_t n, std::size_t size, std::mt19937_64& rng) {
  quant::Codes c(frames, n);
  std::uniform_int_distribution<std::int32_t> pick(0, static_cast<std::int32_t>(size) - 1);
  for (auto& v : c.values) v = pick(rng);
  return c;
}

codec::CodecConfig small_td(codec::QuantizerKind q) {
  auto c = codec::td_nac_config(q);
  c.base_channels = 4;
  c.codebook_size = 32;
  return c;
}

// Exact probability that one mask of width U{0..floor(frac*extent)} at a
// uniform start covers position i.
std::vector<double> single_mask_coverage(std::size_t extent, double frac) {
  const auto widest = static_cast<std::size_t>(std::floor(frac * static_cast<double>(extent)));
  std::vector<double> p(extent, 0.0);
  for (std::size_t w = 0; w <= widest; ++w) {
    const double starts = static_cast<double>(extent - w + 1);
    for (std::size_t s = 0; s + w <= extent; ++s)
      for (std::size_t i = s; i < s + w; ++i) p[i] += 1.0 / (static_cast<double>(widest + 1) * starts);
  }
  return p;
}

}  // namespace

TEST_CASE("embed: one-hot rows, lookup-count gradient, empty input, range errors") {
  nn::Rng rng(1);
  asr::EmbeddingTableSet tables(2, 4, 4, rng);
  for (std::size_t i = 0; i < 2; ++i) {
    tables.table(i).fill(0.0);
    for (std::size_t k = 0; k < 4; ++k) tables.table(i).at(k, k) = 1.0;
  }
  quant::Codes codes(3, 2);
  codes.values = {2, 0, 2, 3, 1, 3};
  Var e = tables.embed(codes);
  REQUIRE(e.shape() == nn::Shape{3, 2, 4});
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t k = 0; k < 4; ++k)
        CHECK(e.value()[(t * 2 + n) * 4 + k] == (static_cast<std::int32_t>(k) == codes.at(t, n) ? 1.0 : 0.0));

  std::mt19937_64 gen(5);
  asr::EmbeddingTableSet big(3, 7, 5, rng);
  const auto many = random_codes(40, 3, 7, gen);
  big.zero_grad();
  nn::backward(nn::sum(big.embed(many)));
  auto params = big.parameters();
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 7; ++k) {
      double count = 0.0;
      for (std::size_t t = 0; t < 40; ++t) count += many.at(t, i) == static_cast<std::int32_t>(k) ? 1.0 : 0.0;
      for (std::size_t d = 0; d < 5; ++d) CHECK(params[i]->grad().at(k, d) == count);
    }
  }

  CHECK(tables.embed(quant::Codes(0, 2)).shape() == nn::Shape{0, 2, 4});
  codes.values[3] = 4;
  CHECK_THROWS_AS(tables.embed(codes), std::out_of_range);
  CHECK_THROWS_AS(tables.embed(quant::Codes(2, 3)), std::invalid_argument);
}

TEST_CASE("codebook init: RVQ rows bit-exact, FSQ rows padded group vectors") {
  codec::Codec rvq(small_td(codec::QuantizerKind::rvq), 2);
  nn::Rng fill(3);
  std::normal_distribution<double> normal;
  for (auto& book : rvq.codebooks().entries)
    for (auto& v : book.data()) v = normal(fill);
  nn::Rng rng(4);
  asr::EmbeddingTableSet tables(8, 32, 128, rng);
  const Tensor random_row0 = tables.table(0);
  asr::init_from_codebooks(tables, rvq);
  for (std::size_t i = 0; i < 8; ++i) CHECK(tables.table(i) == rvq.codebooks().entries[i]);
  CHECK(tables.table(0) != random_row0);

  asr::EmbeddingTableSet narrow(8, 32, 64, rng);
  CHECK_THROWS_AS(asr::init_from_codebooks(narrow, rvq), std::invalid_argument);
  asr::EmbeddingTableSet wrong_size(8, 16, 128, rng);
  CHECK_THROWS_AS(asr::init_from_codebooks(wrong_size, rvq), std::invalid_argument);

  codec::Codec fsq(small_td(codec::QuantizerKind::fsq), 2);
  const auto spec = fsq.config().fsq_spec();
  asr::EmbeddingTableSet ftables(8, 1000, 128, rng);
  asr::init_from_codebooks(ftables, fsq);
  quant::Codes zero(1, 8);
  const Tensor deq = quant::fsq_dequantize(zero, spec);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t d = 0; d < 128; ++d) CHECK(ftables.table(i).at(0, d) == (d < 4 ? deq[i * 4 + d] : 0.0));
    for (std::int32_t c = 0; c < 1000; ++c) {
      const auto v = quant::fsq_group_vector(c, spec);
      for (std::size_t d = 0; d < 128; ++d) {
        if (ftables.table(i).at(static_cast<std::size_t>(c), d) != (d < 4 ? v[d] : 0.0)) {
          FAIL("FSQ row " << c << " of table " << i << " differs at dim " << d);
        }
      }
    }
  }
  asr::EmbeddingTableSet tiny(8, 1000, 3, rng);
  CHECK_THROWS_AS(asr::init_from_codebooks(tiny, spec), std::invalid_argument);
}

TEST_CASE("aggregate: output sizes, identical embeddings, single codebook, permutation") {
  CHECK(asr::aggregated_dim(Aggregation::stack, 8, 128) == 1024);
  CHECK(asr::aggregated_dim(Aggregation::avg, 8, 128) == 128);
  CHECK(asr::parse_aggregation("stack") == Aggregation::stack);
  CHECK_THROWS_AS(asr::parse_aggregation("sum"), std::invalid_argument);

  std::mt19937_64 rng(2);
  Var x(testing::random_tensor({5, 8, 128}, rng));
  CHECK(asr::aggregate(x, Aggregation::stack).shape() == nn::Shape{5, 1024});
  CHECK(asr::aggregate(x, Aggregation::avg).shape() == nn::Shape{5, 128});
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t n = 0; n < 8; ++n)
      for (std::size_t d = 0; d < 128; ++d)
        CHECK(asr::aggregate(x, Aggregation::stack).value().at(t, n * 128 + d) == x.value()[(t * 8 + n) * 128 + d]);

  Tensor same({3, 4, 6});
  const Tensor e = testing::random_tensor({6}, rng);
  for (std::size_t i = 0; i < same.numel(); ++i) same[i] = e[i % 6];
  const Tensor avg = asr::aggregate(Var(same), Aggregation::avg).value();
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t d = 0; d < 6; ++d) CHECK(avg.at(t, d) == doctest::Approx(e[d]).epsilon(1e-15));

  Var one(testing::random_tensor({4, 1, 6}, rng));
  CHECK(asr::aggregate(one, Aggregation::stack).value() == asr::aggregate(one, Aggregation::avg).value());

  // Reverse the codebook axis.
  Tensor perm(x.shape());
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t n = 0; n < 8; ++n)
      for (std::size_t d = 0; d < 128; ++d) perm[(t * 8 + n) * 128 + d] = x.value()[(t * 8 + 7 - n) * 128 + d];
  const Tensor a = asr::aggregate(x, Aggregation::avg).value();
  const Tensor b = asr::aggregate(Var(perm), Aggregation::avg).value();
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-13));
  CHECK(asr::aggregate(x, Aggregation::stack).value() != asr::aggregate(Var(perm), Aggregation::stack).value());
}

TEST_CASE("spec_augment: identities, exact mask values, untouched cells") {
  std::mt19937_64 gen(3);
  Var x(testing::random_tensor({50, 20}, gen));
  nn::Rng rng(1);
  asr::SpecAugConfig cfg;
  CHECK(asr::spec_augment(x, cfg, rng, false).node() == x.node());
  asr::SpecAugConfig none;
  none.n_time_masks = none.n_feature_masks = 0;
  CHECK(asr::spec_augment(x, none, rng, true).value() == x.value());

  cfg.mask_value = 0.75;
  cfg.max_time_mask_frac = 0.2;
  cfg.max_feature_mask_frac = 0.3;
  nn::Rng a(9), b(9);
  const Tensor keep = asr::spec_augment_mask(50, 20, cfg, a);
  const Tensor out = asr::spec_augment(x, cfg, b, true).value();
  std::size_t masked = 0;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    if (keep[i] == 0.0) {
      CHECK(out[i] == 0.75);
      ++masked;
    } else {
      CHECK(out[i] == x.value()[i]);
    }
  }
  CHECK(masked > 0);
  asr::SpecAugConfig bad;
  bad.max_time_mask_frac = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("spec_augment: masked fraction matches the uniform-width expectation") {
  const std::size_t frames = 1000, features = 100;
  asr::SpecAugConfig single;
  single.n_time_masks = 1;
  single.n_feature_masks = 0;
  const auto pt1 = single_mask_coverage(frames, single.max_time_mask_frac);
  double expect1 = 0.0;
  for (double p : pt1) expect1 += p / frames;
  CHECK(expect1 == doctest::Approx(single.max_time_mask_frac / 2).epsilon(1e-12));

  asr::SpecAugConfig cfg;
  const auto pf = single_mask_coverage(features, cfg.max_feature_mask_frac);
  double expect = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    const double qt = std::pow(1.0 - pt1[t], static_cast<double>(cfg.n_time_masks));
    for (std::size_t f = 0; f < features; ++f) {
      const double qf = std::pow(1.0 - pf[f], static_cast<double>(cfg.n_feature_masks));
      expect += (1.0 - qt * qf) / (frames * features);
    }
  }

  const auto run = [&](const asr::SpecAugConfig& c, std::size_t draws) {
    nn::Rng rng(11);
    double sum = 0.0, sq = 0.0;
    for (std::size_t d = 0; d < draws; ++d) {
      const Tensor keep = asr::spec_augment_mask(frames, features, c, rng);
      double m = 0.0;
      for (double k : keep.data()) m += 1.0 - k;
      m /= static_cast<double>(keep.numel());
      sum += m;
      sq += m * m;
    }
    const double mean = sum / draws;
    const double sd = std::sqrt(std::max(sq / draws - mean * mean, 0.0) / draws);
    return std::pair{mean, sd};
  };
  const auto [m1, s1] = run(single, 10000);
  CHECK(std::abs(m1 - expect1) < 4.0 * s1);
  const auto [m, s] = run(cfg, 10000);
  CHECK(std::abs(m - expect) < 4.0 * s);
}

TEST_CASE("noisy_embedding: identities, sup-norm bound, zero mean") {
  std::mt19937_64 gen(4);
  Var x(testing::random_tensor({100, 128}, gen));
  nn::Rng rng(2);
  CHECK(asr::noisy_embedding(x, 5.0, rng, false).node() == x.node());
  CHECK(asr::noisy_embedding(x, 0.0, rng, true).value() == x.value());
  Var empty(Tensor({0, 128}));
  CHECK(asr::noisy_embedding(empty, 5.0, rng, true).numel() == 0);
  CHECK_THROWS_AS(asr::noisy_embedding(x, -1.0, rng, true), std::invalid_argument);

  const double bound = 5.0 / std::sqrt(12800.0);
  CHECK(bound == doctest::Approx(0.04419).epsilon(1e-4));
  double sum = 0.0, sup = 0.0;
  std::size_t n = 0;
  while (n < 100000) {
    const Tensor y = asr::noisy_embedding(x, 5.0, rng, true).value();
    for (std::size_t i = 0; i < y.numel(); ++i) {
      const double u = y[i] - x.value()[i];
      sup = std::max(sup, std::abs(u));
      sum += u;
    }
    n += y.numel();
  }
  CHECK(sup <= bound);
  CHECK(sup > 0.9 * bound);
  const double sigma = bound / std::sqrt(3.0) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sum / n) < 3.0 * sigma);
}

TEST_CASE("acoustic model: output length and vocabulary width") {
  nn::Rng rng(5);
  asr::AcousticModel m(12, 8, 6, rng);
  std::mt19937_64 gen(6);
  for (std::size_t t : {1u, 2u, 3u, 10u, 17u}) {
    const Var y = m.forward(Var(testing::random_tensor({t, 12}, gen)));
    CHECK(y.shape() == nn::Shape{asr::AcousticModel::output_frames(t), 6});
    CHECK(asr::AcousticModel::output_frames(t) == (t + 1) / 2);
  }
  CHECK_THROWS_AS(m.forward(Var(Tensor({0, 12}))), nn::ShapeError);
}

TEST_CASE("ctc: greedy collapse, degenerate lattice, feasibility") {
  // a a blank b with a = 1, b = 2.
  Tensor logits({4, 3}, 0.0);
  logits.at(0, 1) = logits.at(1, 1) = logits.at(2, 0) = logits.at(3, 2) = 1.0;
  CHECK(asr::greedy_decode(logits) == std::vector<std::int32_t>{1, 2});
  Tensor rep({3, 3}, 0.0);
  rep.at(0, 1) = rep.at(1, 0) = rep.at(2, 1) = 1.0;
  CHECK(asr::greedy_decode(rep) == std::vector<std::int32_t>{1, 1});

  Tensor one({1, 4}, std::vector<double>{0.3, -1.2, 2.0, 0.1});
  double z = 0.0;
  for (double v : one.data()) z += std::exp(v);
  CHECK(asr::ctc_loss(Var(one), {2}).value()[0] == doctest::Approx(-std::log(std::exp(2.0) / z)).epsilon(1e-14));

  Tensor two({2, 4}, 0.0);
  CHECK_THROWS_AS(asr::ctc_loss(Var(two), {1, 1}), std::invalid_argument);
  CHECK_NOTHROW(asr::ctc_loss(Var(two), {1, 2}));
  CHECK_THROWS_AS(asr::ctc_loss(Var(two), {1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(asr::ctc_loss(Var(two), {0}), std::invalid_argument);
  CHECK_THROWS_AS(asr::ctc_loss(Var(two), {4}), std::invalid_argument);
  CHECK(asr::ctc_min_frames({1, 1, 2, 2}) == 6);
}

TEST_CASE("ctc: matches the exhaustive alignment sum") {
  std::mt19937_64 gen(7);
  double worst = 0.0;
  for (std::size_t frames = 1; frames <= 5; ++frames) {
    const Tensor logits = testing::random_tensor({frames, 4}, gen, -2.0, 2.0);
    const auto probs = testing::ctc_label_probabilities(logits);
    for (const auto& [labels, p] : probs) {
      if (labels.size() > 3) continue;
      worst = std::max(worst, std::abs(asr::ctc_loss(Var(logits), labels).value()[0] + std::log(p)));
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("ctc: gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 gen(seed);
    Var logits(testing::random_tensor({7, 5}, gen, -2.0, 2.0), true);
    const std::vector<std::int32_t> labels{1, 3, 3, 2};
    const auto r = testing::grad_check([&] { return asr::ctc_loss(logits, labels); }, {logits}, 1e-5, 64, seed);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("error rates: Levenshtein over words and characters") {
  CHECK(asr::wer("a b c", "a b c").rate() == 0.0);
  const auto e = asr::wer("a b c", "a x c");
  CHECK(e.edits == 1);
  CHECK(e.reference_length == 3);
  CHECK(asr::wer("one two three", "").rate() == 1.0);
  CHECK(asr::wer("", "x y").edits == 2);
  CHECK(asr::wer("", "x y").rate() == 2.0);
  CHECK(asr::wer("", "").rate() == 0.0);

  CHECK(asr::cer("ab  cd", "ab cd").edits == 0);
  CHECK(asr::cer("ab\t\ncd", "ab cd").edits == 0);
  CHECK(asr::cer("kitten", "sitting").edits == 3);
  CHECK(asr::cer("héllo", "hello").edits == 1);
  CHECK(asr::cer("héllo", "hello").reference_length == 5);
  asr::ErrorCount total;
  total += asr::cer("abc", "abd");
  total += asr::cer("de", "de");
  CHECK(total.rate() == doctest::Approx(0.2));
}

TEST_CASE("vocabulary: ids, round trip, offending characters listed") {
  asr::Vocabulary v("abcé");
  CHECK(v.size() == 5);
  CHECK(v.encode("cabé") == std::vector<std::int32_t>{3, 1, 2, 4});
  CHECK(v.decode({3, 1, 2, 4}) == "cabé");
  try {
    v.encode("abxyx");
    FAIL("no error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("'x', 'y'") != std::string::npos);
  }
  CHECK_THROWS_AS(asr::Vocabulary("aba"), std::invalid_argument);
  CHECK_THROWS_AS(asr::utf8_to_scalars("\xC3"), std::invalid_argument);
}

TEST_CASE("pipeline: stage shapes for random lengths, inference is deterministic") {
  std::mt19937_64 gen(8);
  for (const auto mode : {Aggregation::stack, Aggregation::avg}) {
    for (const bool before : {false, true}) {
      asr::AsrConfig cfg;
      cfg.aggregation = mode;
      cfg.embedding_dim = 16;
      cfg.hidden = 8;
      cfg.augment_before_aggregation = before;
      asr::AsrModel m(cfg, 4, 10);
      CHECK(m.feature_dim() == (mode == Aggregation::stack ? 64u : 16u));
      for (int rep = 0; rep < 4; ++rep) {
        const std::size_t t = std::uniform_int_distribution<std::size_t>(1, 40)(gen);
        const auto codes = random_codes(t, 4, 10, gen);
        nn::Rng rng(rep);
        const Var feats = m.features(codes, rng, true);
        CHECK(feats.shape() == nn::Shape{t, m.feature_dim()});
        const Var logits = m.forward(codes, rng, true);
        CHECK(logits.shape() == nn::Shape{(t + 1) / 2, 6});
        nn::Rng r1(1), r2(2);
        CHECK(m.features(codes, r1, false).value() == asr::aggregate(m.tables().embed(codes), mode).value());
        CHECK(m.forward(codes, r1, false).value() == m.forward(codes, r2, false).value());
      }
    }
  }
}

TEST_CASE("codebook-initialized tables change after one optimizer step") {
  codec::Codec model(small_td(codec::QuantizerKind::rvq), 1);
  nn::Rng fill(3);
  std::normal_distribution<double> normal;
  for (auto& book : model.codebooks().entries)
    for (auto& v : book.data()) v = normal(fill);
  asr::AsrConfig cfg;
  cfg.hidden = 8;
  asr::AsrModel m(cfg, 8, 32);
  asr::init_from_codebooks(m.tables(), model);
  std::mt19937_64 gen(2);
  const auto codes = random_codes(12, 8, 32, gen);
  nn::AdamW opt(m.parameters());
  nn::Rng rng(0);
  nn::backward(asr::ctc_loss(m.forward(codes, rng, true), {1, 2}));
  opt.step(1e-3);
  bool changed = false;
  for (std::size_t i = 0; i < 8; ++i) changed = changed || m.tables().table(i) != model.codebooks().entries[i];
  CHECK(changed);
}

TEST_CASE("synthetic language: distinct transcripts, fixed symbol audio") {
  asr::SyntheticLanguageOptions o;
  o.utterances = 30;
  const auto a = asr::make_synthetic_language(o, 200);
  const auto b = asr::make_synthetic_language(o, 200);
  REQUIRE(a.size() == 30);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(seen.insert(a[i].transcript).second);
    CHECK(a[i].audio.samples == b[i].audio.samples);
    const std::size_t n = a[i].transcript.size();
    CHECK(n >= o.min_length);
    CHECK(n <= o.max_length);
    CHECK(a[i].audio.samples.size() == 200 * (o.gap_frames + n * (o.symbol_frames + o.gap_frames)));
  }
  o.min_length = o.max_length = 1;
  o.utterances = 6;
  CHECK_THROWS_AS(asr::make_synthetic_language(o, 200), std::invalid_argument);
}

TEST_CASE("asr training: deterministic and the loss falls on a small set") {
  codec::Codec model(small_td(codec::QuantizerKind::rvq), 1);
  asr::SyntheticLanguageOptions o;
  o.utterances = 12;
  o.max_length = 3;
  auto data = asr::encode_utterances(model, asr::make_synthetic_language(o, 200));
  asr::AsrConfig cfg;
  cfg.codebook_init = false;
  cfg.embedding_dim = 16;
  cfg.hidden = 16;
  cfg.epochs = 6;
  cfg.batch_size = 4;
  cfg.seed = 3;
  asr::AsrModel m1(cfg, 8, 32), m2(cfg, 8, 32);
  const auto l1 = asr::train_asr(m1, data);
  const auto l2 = asr::train_asr(m2, data);
  CHECK(l1 == l2);
  CHECK(l1.back() < l1.front());
  CHECK(asr::evaluate_asr(m1, data).char_errors.reference_length > 0);

  data[0].transcript = "az";
  CHECK_THROWS_AS(asr::train_asr(m1, data), std::invalid_argument);
}
