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


// Discrete-code ASR frontend: per-codebook embedding tables, aggregation,
// SpecAug and noisy embeddings, plus a small CTC acoustic model and error
// rates used to check the pipeline end to end.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nacasr/codec.hpp"
#include "nacasr/layers.hpp"
#include "nacasr/quantizers.hpp"

namespace nac::asr {

class EmbeddingTableSet : public nn::Module {
 public:
  /// N(0, 1) rows.
  EmbeddingTableSet(std::size_t n_tables, std::size_t table_size, std::size_t dim, nn::Rng& rng);

  std::size_t n_tables() const { return tables_.size(); }
  std::size_t table_size() const { return tables_.front()->value().dim(0); }
  std::size_t dim() const { return tables_.front()->value().dim(1); }
  nn::Tensor& table(std::size_t i) { return tables_.at(i)->value(); }
  const nn::Tensor& table(std::size_t i) const { return tables_.at(i)->value(); }

  /// [T x N_cb x D_emb]; throws std::out_of_range on a code outside its table.
  nn::Var embed(const quant::Codes& codes) const;

 private:
  std::vector<nn::Parameter*> tables_;
};

/// Row k of table i becomes C_i[k]. Requires D_emb == D_enc.
void init_from_codebooks(EmbeddingTableSet& tables, const quant::CodebookSet& books);
/// Row c of every table becomes the dequantized group vector of c in the
/// leading dims, zeros elsewhere.
void init_from_codebooks(EmbeddingTableSet& tables, const quant::FsqSpec& spec);
void init_from_codebooks(EmbeddingTableSet& tables, const codec::Codec& model);

enum class Aggregation { stack, avg };
Aggregation parse_aggregation(const std::string& name);
std::string aggregation_name(Aggregation mode);
std::size_t aggregated_dim(Aggregation mode, std::size_t n_tables, std::size_t dim);

/// [T x N x D] -> [T x N*D] (stack, ascending codebook order) or [T x D] (avg).
nn::Var aggregate(const nn::Var& embeddings, Aggregation mode);

struct SpecAugConfig {
  std::size_t n_time_masks = 10;
  double max_time_mask_frac = 0.05;
  std::size_t n_feature_masks = 2;
  double max_feature_mask_frac = 0.10;
  double mask_value = 0.0;

  void validate() const;
};

/// Mask covering time and feature ranges. Widths are uniform integers in
/// [0, floor(frac * extent)], starts uniform over the valid positions.
nn::Tensor spec_augment_mask(std::size_t frames, std::size_t features, const SpecAugConfig& cfg,
                             nn::Rng& rng);

/// [T x D]. Identity when `training` is false.
nn::Var spec_augment(const nn::Var& seq, const SpecAugConfig& cfg, nn::Rng& rng, bool training);

struct NoisyEmbeddingConfig {
  double alpha = 5.0;

  void validate() const;
};

/// seq + U(-1, 1) * alpha / sqrt(T * D) in training; identity otherwise.
nn::Var noisy_embedding(const nn::Var& seq, double alpha, nn::Rng& rng, bool training);

/// Stride-2 kernel-3 conv, two LSTM layers, linear projection to V logits.
class AcousticModel : public nn::Module {
 public:
  AcousticModel(std::size_t input_dim, std::size_t hidden, std::size_t vocab_size, nn::Rng& rng);

  /// [T x D_in] -> [T' x V] with T' = ceil(T / 2).
  nn::Var forward(const nn::Var& features) const;
  static std::size_t output_frames(std::size_t frames) { return (frames + 1) / 2; }

 private:
  nn::Conv1d& conv_;
  nn::Lstm& lstm_;
  nn::Linear& proj_;
};

/// Minimum frames a CTC alignment of `labels` needs.
std::size_t ctc_min_frames(const std::vector<std::int32_t>& labels);

/// -log p(labels | logits) summed over all alignments; logits are [T' x V]
/// and unnormalized. Throws std::invalid_argument when no alignment fits.
nn::Var ctc_loss(const nn::Var& logits, const std::vector<std::int32_t>& labels,
                 std::int32_t blank = 0);

/// Frame argmax, repeats collapsed, blanks removed.
std::vector<std::int32_t> greedy_decode(const nn::Tensor& logits, std::int32_t blank = 0);

/// Blank at id 0, then one id per unicode scalar of `symbols`.
class Vocabulary {
 public:
  explicit Vocabulary(std::string_view symbols);

  std::size_t size() const { return symbols_.size() + 1; }
  const std::string& symbols() const { return text_; }
  /// Throws std::invalid_argument listing every character not in the vocabulary.
  std::vector<std::int32_t> encode(std::string_view text) const;
  std::string decode(const std::vector<std::int32_t>& ids) const;

 private:
  std::u32string symbols_;
  std::string text_;
};

std::u32string utf8_to_scalars(std::string_view text);
std::string scalars_to_utf8(std::u32string_view text);

struct ErrorCount {
  std::size_t edits = 0;
  std::size_t reference_length = 0;

  /// edits / reference_length; an empty reference counts as length 1.
  double rate() const;
  ErrorCount& operator+=(const ErrorCount& other);
};

/// Unit-cost Levenshtein distance.
template <typename T>
std::size_t edit_distance(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

/// Over whitespace-separated words.
ErrorCount wer(std::string_view reference, std::string_view hypothesis);
/// Over unicode scalars after collapsing whitespace runs to one space and
/// trimming both ends.
ErrorCount cer(std::string_view reference, std::string_view hypothesis);

}  // namespace nac::asr
