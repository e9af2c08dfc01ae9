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


#include "nacasr/asr.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>

#include "nacasr/ops.hpp"

namespace nac::asr {

using nn::Shape;
using nn::Tensor;
using nn::Var;

EmbeddingTableSet::EmbeddingTableSet(std::size_t n_tables, std::size_t table_size, std::size_t dim,
                                     nn::Rng& rng) {
  if (n_tables == 0 || table_size == 0 || dim == 0) {
    throw std::invalid_argument("embedding tables need positive count, size and width");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n_tables; ++i) {
    Tensor t({table_size, dim});
    for (auto& v : t.data()) v = normal(rng);
    tables_.push_back(&register_parameter("table" + std::to_string(i), std::move(t)));
  }
}

Var EmbeddingTableSet::embed(const quant::Codes& codes) const {
  if (codes.n_codebooks != n_tables()) {
    throw std::invalid_argument("codes have " + std::to_string(codes.n_codebooks) +
                                " codebooks, embedding has " + std::to_string(n_tables()) +
                                " tables");
  }
  std::vector<Var> vars;
  vars.reserve(tables_.size());
  for (auto* p : tables_) vars.push_back(p->var());
  return nn::embedding(codes.values, n_tables(), vars);
}

void init_from_codebooks(EmbeddingTableSet& tables, const quant::CodebookSet& books) {
  books.validate();
  if (books.n_codebooks != tables.n_tables() || books.codebook_size != tables.table_size()) {
    throw std::invalid_argument("codec has " + std::to_string(books.n_codebooks) + " x " +
                                std::to_string(books.codebook_size) + " codebooks, embedding has " +
                                std::to_string(tables.n_tables()) + " x " +
                                std::to_string(tables.table_size()) + " tables");
  }
  if (books.dim != tables.dim()) {
    throw std::invalid_argument("RVQ codebook init needs D_emb == D_enc (" +
                                std::to_string(tables.dim()) + " vs " + std::to_string(books.dim) +
                                ")");
  }
  for (std::size_t i = 0; i < books.n_codebooks; ++i) tables.table(i) = books.entries[i];
}

void init_from_codebooks(EmbeddingTableSet& tables, const quant::FsqSpec& spec) {
  spec.validate();
  if (spec.n_groups != tables.n_tables() || spec.codebook_size() != tables.table_size()) {
    throw std::invalid_argument("FSQ has " + std::to_string(spec.n_groups) + " groups of " +
                                std::to_string(spec.codebook_size()) + " codes, embedding has " +
                                std::to_string(tables.n_tables()) + " x " +
                                std::to_string(tables.table_size()) + " tables");
  }
  if (spec.group_dim() > tables.dim()) {
    throw std::invalid_argument("FSQ group dimension " + std::to_string(spec.group_dim()) +
                                " exceeds D_emb " + std::to_string(tables.dim()));
  }
  const std::size_t width = tables.dim();
  Tensor rows({spec.codebook_size(), width});
  for (std::size_t c = 0; c < spec.codebook_size(); ++c) {
    const auto v = quant::fsq_group_vector(static_cast<std::int32_t>(c), spec);
    std::copy(v.begin(), v.end(), &rows[c * width]);
  }
  for (std::size_t i = 0; i < tables.n_tables(); ++i) tables.table(i) = rows;
}

void init_from_codebooks(EmbeddingTableSet& tables, const codec::Codec& model) {
  if (model.config().quantizer == codec::QuantizerKind::rvq) {
    init_from_codebooks(tables, model.codebooks());
  } else {
    init_from_codebooks(tables, model.config().fsq_spec());
  }
}

Aggregation parse_aggregation(const std::string& name) {
  if (name == "stack") return Aggregation::stack;
  if (name == "avg") return Aggregation::avg;
  throw std::invalid_argument("unknown aggregation '" + name + "' (expected stack or avg)");
}

std::string aggregation_name(Aggregation mode) {
  return mode == Aggregation::stack ? "stack" : "avg";
}

std::size_t aggregated_dim(Aggregation mode, std::size_t n_tables, std::size_t dim) {
  return mode == Aggregation::stack ? n_tables * dim : dim;
}

Var aggregate(const Var& embeddings, Aggregation mode) {
  if (embeddings.value().rank() != 3) {
    throw nn::ShapeError("aggregate: expected [T x N x D], got " +
                         nn::shape_to_string(embeddings.shape()));
  }
  const std::size_t frames = embeddings.dim(0), n = embeddings.dim(1), d = embeddings.dim(2);
  if (mode == Aggregation::stack) return nn::reshape(embeddings, {frames, n * d});
  return nn::mean_axis1(embeddings);
}

void SpecAugConfig::validate() const {
  const auto in_unit = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (!in_unit(max_time_mask_frac) || !in_unit(max_feature_mask_frac)) {
    throw std::invalid_argument("SpecAug mask fractions must lie in [0, 1]");
  }
  if (!std::isfinite(mask_value)) throw std::invalid_argument("SpecAug mask value must be finite");
}

namespace {

// Zeroes `count` ranges along one axis of the keep mask.
template <typename Zero>
void draw_masks(std::size_t count, double frac, std::size_t extent, nn::Rng& rng, Zero zero) {
  if (extent == 0) return;
  const auto widest = static_cast<std::size_t>(std::floor(frac * static_cast<double>(extent)));
  for (std::size_t m = 0; m < count; ++m) {
    const std::size_t w = std::uniform_int_distribution<std::size_t>(0, widest)(rng);
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, extent - w)(rng);
    for (std::size_t i = start; i < start + w; ++i) zero(i);
  }
}

}  // namespace

Tensor spec_augment_mask(std::size_t frames, std::size_t features, const SpecAugConfig& cfg,
                         nn::Rng& rng) {
  cfg.validate();
  Tensor keep({frames, features}, 1.0);
  draw_masks(cfg.n_time_masks, cfg.max_time_mask_frac, frames, rng, [&](std::size_t t) {
    for (std::size_t f = 0; f < features; ++f) keep[t * features + f] = 0.0;
  });
  draw_masks(cfg.n_feature_masks, cfg.max_feature_mask_frac, features, rng, [&](std::size_t f) {
    for (std::size_t t = 0; t < frames; ++t) keep[t * features + f] = 0.0;
  });
  return keep;
}

Var spec_augment(const Var& seq, const SpecAugConfig& cfg, nn::Rng& rng, bool training) {
  if (!training) return seq;
  if (seq.value().rank() != 2) {
    throw nn::ShapeError("spec_augment: expected [T x D], got " + nn::shape_to_string(seq.shape()));
  }
  const Tensor keep = spec_augment_mask(seq.dim(0), seq.dim(1), cfg, rng);
  Var out = nn::mul_constant(seq, keep);
  if (cfg.mask_value != 0.0) {
    Tensor fill(keep.shape());
    for (std::size_t i = 0; i < fill.numel(); ++i) fill[i] = (1.0 - keep[i]) * cfg.mask_value;
    out = nn::add_constant(out, fill);
  }
  return out;
}

void NoisyEmbeddingConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("noise alpha must be finite and non-negative");
  }
}

Var noisy_embedding(const Var& seq, double alpha, nn::Rng& rng, bool training) {
  NoisyEmbeddingConfig{alpha}.validate();
  if (!training || alpha == 0.0 || seq.numel() == 0) return seq;
  const double scale = alpha / std::sqrt(static_cast<double>(seq.numel()));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Tensor noise(seq.shape());
  for (auto& v : noise.data()) v = unit(rng) * scale;
  return nn::add_constant(seq, noise);
}

AcousticModel::AcousticModel(std::size_t input_dim, std::size_t hidden, std::size_t vocab_size,
                             nn::Rng& rng)
    : conv_(register_module<nn::Conv1d>("conv", input_dim, hidden, 3, rng,
                                        nn::ConvOptions{2, 1, 1, 1})),
      lstm_(register_module<nn::Lstm>("lstm", hidden, hidden, 2, rng)),
      proj_(register_module<nn::Linear>("proj", hidden, vocab_size, rng)) {}

Var AcousticModel::forward(const Var& features) const {
  if (features.value().rank() != 2 || features.dim(0) == 0) {
    throw nn::ShapeError("acoustic model: expected non-empty [T x D], got " +
                         nn::shape_to_string(features.shape()));
  }
  Var h = conv_.forward(nn::transpose(features));
  h = nn::transpose(nn::elu(h));
  return proj_.forward(lstm_.forward(h));
}

std::size_t ctc_min_frames(const std::vector<std::int32_t>& labels) {
  std::size_t n = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i) n += labels[i] == labels[i - 1] ? 1 : 0;
  return n;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

Var ctc_loss(const Var& logits, const std::vector<std::int32_t>& labels, std::int32_t blank) {
  if (logits.value().rank() != 2) {
    throw nn::ShapeError("ctc_loss: expected [T x V] logits, got " +
                         nn::shape_to_string(logits.shape()));
  }
  const std::size_t frames = logits.dim(0), vocab = logits.dim(1);
  if (blank < 0 || static_cast<std::size_t>(blank) >= vocab) {
    throw std::invalid_argument("ctc_loss: blank id outside the vocabulary");
  }
  for (const auto l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= vocab || l == blank) {
      throw std::invalid_argument("ctc_loss: label " + std::to_string(l) +
                                  " is blank or outside the vocabulary of " + std::to_string(vocab));
    }
  }
  if (frames < ctc_min_frames(labels)) {
    throw std::invalid_argument("ctc_loss: " + std::to_string(labels.size()) + " labels need " +
                                std::to_string(ctc_min_frames(labels)) + " frames, got " +
                                std::to_string(frames));
  }

  Tensor logp({frames, vocab});
  const auto& x = logits.value();
  for (std::size_t t = 0; t < frames; ++t) {
    double hi = kNegInf;
    for (std::size_t k = 0; k < vocab; ++k) hi = std::max(hi, x[t * vocab + k]);
    double z = 0.0;
    for (std::size_t k = 0; k < vocab; ++k) z += std::exp(x[t * vocab + k] - hi);
    const double lse = hi + std::log(z);
    for (std::size_t k = 0; k < vocab; ++k) logp[t * vocab + k] = x[t * vocab + k] - lse;
  }

  // Extended sequence: blank, l1, blank, l2, ..., blank.
  const std::size_t states = 2 * labels.size() + 1;
  std::vector<std::int32_t> ext(states, blank);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  const auto skip_ok = [&](std::size_t s) { return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]; };

  std::vector<double> alpha(frames * states, kNegInf), beta(frames * states, kNegInf);
  alpha[0] = logp[static_cast<std::size_t>(ext[0])];
  if (states > 1) alpha[1] = logp[static_cast<std::size_t>(ext[1])];
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double a = alpha[(t - 1) * states + s];
      if (s >= 1) a = log_add(a, alpha[(t - 1) * states + s - 1]);
      if (skip_ok(s)) a = log_add(a, alpha[(t - 1) * states + s - 2]);
      if (a != kNegInf) alpha[t * states + s] = a + logp[t * vocab + static_cast<std::size_t>(ext[s])];
    }
  }
  // beta excludes the emission at its own frame.
  beta[(frames - 1) * states + states - 1] = 0.0;
  if (states > 1) beta[(frames - 1) * states + states - 2] = 0.0;
  for (std::size_t t = frames - 1; t-- > 0;) {
    const auto emit = [&](std::size_t s) {
      return beta[(t + 1) * states + s] + logp[(t + 1) * vocab + static_cast<std::size_t>(ext[s])];
    };
    for (std::size_t s = 0; s < states; ++s) {
      double b = emit(s);
      if (s + 1 < states) b = log_add(b, emit(s + 1));
      if (s + 2 < states && skip_ok(s + 2)) b = log_add(b, emit(s + 2));
      beta[t * states + s] = b;
    }
  }
  double log_p = alpha[(frames - 1) * states + states - 1];
  if (states > 1) log_p = log_add(log_p, alpha[(frames - 1) * states + states - 2]);

  Tensor grad({frames, vocab});
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < vocab; ++k) grad[t * vocab + k] = std::exp(logp[t * vocab + k]);
    for (std::size_t s = 0; s < states; ++s) {
      const double occ = alpha[t * states + s] + beta[t * states + s] - log_p;
      if (occ != kNegInf) grad[t * vocab + static_cast<std::size_t>(ext[s])] -= std::exp(occ);
    }
  }
  return nn::make_result(Tensor::scalar(-log_p), {logits}, [grad](nn::Node& self) {
    auto& parent = *self.parents[0];
    if (!parent.requires_grad) return;
    Tensor& g = parent.grad_buffer();
    const double upstream = self.grad[0];
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += upstream * grad[i];
  });
}

std::vector<std::int32_t> greedy_decode(const Tensor& logits, std::int32_t blank) {
  if (logits.rank() != 2) throw nn::ShapeError("greedy_decode: expected [T x V] logits");
  const std::size_t frames = logits.dim(0), vocab = logits.dim(1);
  std::vector<std::int32_t> out;
  std::int32_t prev = -1;
  for (std::size_t t = 0; t < frames; ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < vocab; ++k)
      if (logits[t * vocab + k] > logits[t * vocab + best]) best = k;
    const auto id = static_cast<std::int32_t>(best);
    if (id != prev && id != blank) out.push_back(id);
    prev = id;
  }
  return out;
}

std::u32string utf8_to_scalars(std::string_view text) {
  std::u32string out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t extra = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
      cp = lead;
    } else if ((lead & 0xE0) == 0xC0) {
      extra = 1;
      cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
      extra = 2;
      cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
      extra = 3;
      cp = lead & 0x07;
    } else {
      throw std::invalid_argument("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + extra >= text.size()) {
      throw std::invalid_argument("truncated UTF-8 sequence at offset " + std::to_string(i));
    }
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto c = static_cast<unsigned char>(text[i + k]);
      if ((c & 0xC0) != 0x80) {
        throw std::invalid_argument("invalid UTF-8 continuation at offset " + std::to_string(i + k));
      }
      cp = (cp << 6) | (c & 0x3F);
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::string scalars_to_utf8(std::u32string_view text) {
  std::string out;
  for (const char32_t cp : text) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

Vocabulary::Vocabulary(std::string_view symbols)
    : symbols_(utf8_to_scalars(symbols)), text_(symbols) {
  if (symbols_.empty()) throw std::invalid_argument("vocabulary needs at least one symbol");
  std::set<char32_t> seen;
  for (const char32_t c : symbols_) {
    if (!seen.insert(c).second) {
      throw std::invalid_argument("vocabulary repeats '" + scalars_to_utf8(std::u32string(1, c)) +
                                  "'");
    }
  }
}

std::vector<std::int32_t> Vocabulary::encode(std::string_view text) const {
  std::vector<std::int32_t> ids;
  std::u32string unknown;
  for (const char32_t c : utf8_to_scalars(text)) {
    const auto pos = symbols_.find(c);
    if (pos == std::u32string::npos) {
      if (unknown.find(c) == std::u32string::npos) unknown.push_back(c);
      continue;
    }
    ids.push_back(static_cast<std::int32_t>(pos + 1));
  }
  if (!unknown.empty()) {
    std::string list;
    for (const char32_t c : unknown) {
      if (!list.empty()) list += ", ";
      list += "'" + scalars_to_utf8(std::u32string(1, c)) + "'";
    }
    throw std::invalid_argument("transcript characters outside the vocabulary: " + list);
  }
  return ids;
}

std::string Vocabulary::decode(const std::vector<std::int32_t>& ids) const {
  std::u32string out;
  for (const auto id : ids) {
    if (id <= 0 || static_cast<std::size_t>(id) > symbols_.size()) {
      throw std::out_of_range("token id " + std::to_string(id) + " outside the vocabulary");
    }
    out.push_back(symbols_[static_cast<std::size_t>(id) - 1]);
  }
  return scalars_to_utf8(out);
}

double ErrorCount::rate() const {
  return static_cast<double>(edits) / static_cast<double>(std::max<std::size_t>(reference_length, 1));
}

ErrorCount& ErrorCount::operator+=(const ErrorCount& other) {
  edits += other.edits;
  reference_length += other.reference_length;
  return *this;
}

namespace {

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f';
}

std::vector<std::u32string> split_words(std::string_view text) {
  std::vector<std::u32string> words;
  std::u32string cur;
  for (const char32_t c : utf8_to_scalars(text)) {
    if (is_space(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::vector<char32_t> normalized_chars(std::string_view text) {
  std::vector<char32_t> out;
  for (const auto& w : split_words(text)) {
    if (!out.empty()) out.push_back(U' ');
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

}  // namespace

ErrorCount wer(std::string_view reference, std::string_view hypothesis) {
  const auto ref = split_words(reference);
  return {edit_distance(ref, split_words(hypothesis)), ref.size()};
}

ErrorCount cer(std::string_view reference, std::string_view hypothesis) {
  const auto ref = normalized_chars(reference);
  return {edit_distance(ref, normalized_chars(hypothesis)), ref.size()};
}

}  // namespace nac::asr
