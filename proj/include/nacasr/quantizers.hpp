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


// Residual vector quantization and finite scalar quantization.
//
// Codes are laid out frame-major: codes.at(t, i) is the code of frame t from
// codebook (RVQ) or group (FSQ) i.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nacasr/autograd.hpp"
#include "nacasr/layers.hpp"

namespace nac::quant {

struct Codes {
  std::size_t frames = 0;
  std::size_t n_codebooks = 0;
  std::vector<std::int32_t> values;  // [frames x n_codebooks]

  Codes() = default;
  Codes(std::size_t frames_, std::size_t n_codebooks_)
      : frames(frames_), n_codebooks(n_codebooks_), values(frames_ * n_codebooks_, 0) {}

  std::int32_t& at(std::size_t t, std::size_t i) { return values[t * n_codebooks + i]; }
  std::int32_t at(std::size_t t, std::size_t i) const { return values[t * n_codebooks + i]; }
  bool operator==(const Codes&) const = default;
};

/// Throws std::out_of_range naming frame, codebook and value if any code is
/// outside [0, codebook_size).
void check_code_range(const Codes& codes, std::size_t codebook_size);

/// Shannon entropy (bits) of codebook `book`'s code histogram.
double usage_entropy_bits(const Codes& codes, std::size_t book, std::size_t codebook_size);

// ---------------------------------------------------------------------------
// RVQ

struct CodebookSet {
  std::size_t n_codebooks = 0;
  std::size_t codebook_size = 0;
  std::size_t dim = 0;
  std::vector<nn::Tensor> entries;             // n_codebooks x [codebook_size x dim]
  std::vector<std::vector<double>> usage_ema;  // n_codebooks x codebook_size

  CodebookSet() = default;
  CodebookSet(std::size_t n_codebooks_, std::size_t codebook_size_, std::size_t dim_);

  void validate() const;
};

/// Greedy residual search; ties resolve to the smallest index.
Codes rvq_encode(const nn::Tensor& latents, const CodebookSet& books);

/// Sum of the selected entries of the first `use_codebooks` books (all when 0).
nn::Tensor rvq_decode(const Codes& codes, const CodebookSet& books, std::size_t use_codebooks = 0);

/// Seeds every stage from residuals of `latents`: stage i draws its entries
/// from the residual left after stages 0..i-1.
void rvq_init_from_batch(CodebookSet& books, const nn::Tensor& latents, nn::Rng& rng);

struct RvqUpdateOptions {
  double decay = 0.99;
  double dead_threshold = 1e-3;
};

struct RvqUpdateStats {
  double commitment = 0.0;  // mean squared distance between latents and reconstruction
  std::size_t reinitialized = 0;
};

/// EMA codebook step. `codes` must come from rvq_encode(latents, books)
/// before the update. usage_ema moves toward n_k * codebook_size / frames,
/// so uniform use sits at 1.
RvqUpdateStats rvq_train_update(CodebookSet& books, const nn::Tensor& latents, const Codes& codes,
                                nn::Rng& rng, const RvqUpdateOptions& opts = {});

/// mean((z - sg(z_hat))^2); gradient reaches z only.
nn::Var commitment_loss(const nn::Var& latents, const nn::Tensor& quantized);

// ---------------------------------------------------------------------------
// FSQ

struct FsqSpec {
  std::size_t n_groups = 8;
  std::vector<std::size_t> levels = {8, 5, 5, 5};

  std::size_t group_dim() const { return levels.size(); }
  std::size_t dim() const { return n_groups * levels.size(); }
  std::size_t codebook_size() const;
  void validate() const;
};

/// Mixed radix, first digit least significant.
std::int32_t pack_digits(std::span<const std::int32_t> digits, std::span<const std::size_t> levels);
std::vector<std::int32_t> unpack_digits(std::int32_t code, std::span<const std::size_t> levels);

/// Differentiable bound to the normalized FSQ range. For level L with
/// H = floor(L/2) and h = (L-1)(1-1e-3)/2, element z maps to
/// (h*tanh(z + s) - o) / H where o = 1/2 for even L (else 0) and
/// s = atanh(o/h); L = 2 uses h = 1/2 and s = 0. Rounding the result times
/// H gives exactly L integers.
nn::Var fsq_bound(const nn::Var& latents, const FsqSpec& spec);

/// Rounds bounded values (as produced by fsq_bound, or by fsq_dequantize)
/// onto the grid and packs each group.
Codes fsq_quantize(const nn::Tensor& bounded, const FsqSpec& spec);
nn::Tensor fsq_dequantize(const Codes& codes, const FsqSpec& spec);

/// Dequantized group vector of one packed code.
std::vector<double> fsq_group_vector(std::int32_t code, const FsqSpec& spec);

}  // namespace nac::quant
