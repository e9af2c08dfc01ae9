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


#include "nacasr/quantizers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "nacasr/kernels.hpp"
#include "nacasr/ops.hpp"

namespace nac::quant {

void check_code_range(const Codes& codes, std::size_t codebook_size) {
  if (codes.values.size() != codes.frames * codes.n_codebooks) {
    throw std::invalid_argument("code matrix holds " + std::to_string(codes.values.size()) +
                                " values for " + std::to_string(codes.frames) + " x " +
                                std::to_string(codes.n_codebooks));
  }
  for (std::size_t t = 0; t < codes.frames; ++t) {
    for (std::size_t i = 0; i < codes.n_codebooks; ++i) {
      const std::int32_t c = codes.at(t, i);
      if (c < 0 || static_cast<std::size_t>(c) >= codebook_size) {
        throw std::out_of_range("code " + std::to_string(c) + " at frame " + std::to_string(t) +
                                " of codebook " + std::to_string(i) + " is outside [0, " +
                                std::to_string(codebook_size) + ")");
      }
    }
  }
}

double usage_entropy_bits(const Codes& codes, std::size_t book, std::size_t codebook_size) {
  if (codes.frames == 0) return 0.0;
  std::vector<std::size_t> hist(codebook_size, 0);
  for (std::size_t t = 0; t < codes.frames; ++t) ++hist.at(static_cast<std::size_t>(codes.at(t, book)));
  double h = 0.0;
  for (std::size_t n : hist) {
    if (n == 0) continue;
    const double p = static_cast<double>(n) / static_cast<double>(codes.frames);
    h -= p * std::log2(p);
  }
  return h;
}

CodebookSet::CodebookSet(std::size_t n_codebooks_, std::size_t codebook_size_, std::size_t dim_)
    : n_codebooks(n_codebooks_), codebook_size(codebook_size_), dim(dim_) {
  if (n_codebooks == 0 || codebook_size == 0 || dim == 0) {
    throw std::invalid_argument("codebook set needs positive count, size and dim");
  }
  entries.assign(n_codebooks, nn::Tensor({codebook_size, dim}, 0.0));
  usage_ema.assign(n_codebooks, std::vector<double>(codebook_size, 1.0));
}

void CodebookSet::validate() const {
  if (n_codebooks == 0) throw std::invalid_argument("codebook set is empty");
  if (entries.size() != n_codebooks || usage_ema.size() != n_codebooks) {
    throw std::invalid_argument("codebook set holds " + std::to_string(entries.size()) +
                                " books, expected " + std::to_string(n_codebooks));
  }
  for (std::size_t i = 0; i < n_codebooks; ++i) {
    if (entries[i].shape() != nn::Shape{codebook_size, dim}) {
      throw nn::ShapeError("codebook " + std::to_string(i) + " has shape " +
                           nn::shape_to_string(entries[i].shape()) + ", expected [" +
                           std::to_string(codebook_size) + ", " + std::to_string(dim) + "]");
    }
    if (usage_ema[i].size() != codebook_size) {
      throw std::invalid_argument("usage statistics of codebook " + std::to_string(i) +
                                  " have the wrong length");
    }
    entries[i].check_finite("codebook " + std::to_string(i));
  }
}

namespace {

void require_latents(const nn::Tensor& latents, std::size_t dim, const char* who) {
  if (latents.rank() != 2 || latents.dim(1) != dim) {
    throw nn::ShapeError(std::string(who) + ": latents " + nn::shape_to_string(latents.shape()) +
                         " do not have " + std::to_string(dim) + " columns");
  }
}

void subtract_entries(std::vector<double>& residual, const nn::Tensor& book,
                      std::span<const std::int32_t> picks, std::size_t stride, std::size_t dim) {
  const std::size_t frames = residual.size() / dim;
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t k = static_cast<std::size_t>(picks[t * stride]);
    for (std::size_t d = 0; d < dim; ++d) residual[t * dim + d] -= book[k * dim + d];
  }
}

}  // namespace

Codes rvq_encode(const nn::Tensor& latents, const CodebookSet& books) {
  require_latents(latents, books.dim, "rvq_encode");
  const std::size_t frames = latents.dim(0), dim = books.dim;
  Codes codes(frames, books.n_codebooks);
  std::vector<double> residual = latents.storage();
  std::vector<std::int32_t> picks(frames);
  for (std::size_t i = 0; i < books.n_codebooks; ++i) {
    kernels::nearest_rows(frames, dim, residual, books.codebook_size, books.entries[i].data(),
                          picks);
    for (std::size_t t = 0; t < frames; ++t) codes.at(t, i) = picks[t];
    subtract_entries(residual, books.entries[i], picks, 1, dim);
  }
  return codes;
}

nn::Tensor rvq_decode(const Codes& codes, const CodebookSet& books, std::size_t use_codebooks) {
  if (codes.n_codebooks != books.n_codebooks) {
    throw std::invalid_argument("rvq_decode: stream has " + std::to_string(codes.n_codebooks) +
                                " codebooks, quantizer has " + std::to_string(books.n_codebooks));
  }
  check_code_range(codes, books.codebook_size);
  const std::size_t use = use_codebooks == 0 ? books.n_codebooks : use_codebooks;
  if (use > books.n_codebooks) throw std::invalid_argument("rvq_decode: too many codebooks requested");
  const std::size_t dim = books.dim;
  nn::Tensor out({codes.frames, dim}, 0.0);
  for (std::size_t t = 0; t < codes.frames; ++t) {
    for (std::size_t i = 0; i < use; ++i) {
      const auto k = static_cast<std::size_t>(codes.at(t, i));
      for (std::size_t d = 0; d < dim; ++d) out[t * dim + d] += books.entries[i][k * dim + d];
    }
  }
  return out;
}

void rvq_init_from_batch(CodebookSet& books, const nn::Tensor& latents, nn::Rng& rng) {
  require_latents(latents, books.dim, "rvq_init_from_batch");
  const std::size_t frames = latents.dim(0), dim = books.dim;
  if (frames == 0) throw std::invalid_argument("rvq_init_from_batch: empty batch");
  std::vector<double> residual = latents.storage();
  std::vector<std::size_t> order(frames);
  std::vector<std::int32_t> picks(frames);
  for (std::size_t i = 0; i < books.n_codebooks; ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < books.codebook_size; ++k) {
      const std::size_t src = order[k % frames];
      std::copy_n(&residual[src * dim], dim, &books.entries[i][k * dim]);
    }
    std::fill(books.usage_ema[i].begin(), books.usage_ema[i].end(), 1.0);
    kernels::nearest_rows(frames, dim, residual, books.codebook_size, books.entries[i].data(),
                          picks);
    subtract_entries(residual, books.entries[i], picks, 1, dim);
  }
}

RvqUpdateStats rvq_train_update(CodebookSet& books, const nn::Tensor& latents, const Codes& codes,
                                nn::Rng& rng, const RvqUpdateOptions& opts) {
  require_latents(latents, books.dim, "rvq_train_update");
  const std::size_t frames = latents.dim(0), dim = books.dim;
  if (frames == 0) throw std::invalid_argument("rvq_train_update: empty batch");
  if (codes.frames != frames || codes.n_codebooks != books.n_codebooks) {
    throw std::invalid_argument("rvq_train_update: assignments do not match the batch");
  }
  check_code_range(codes, books.codebook_size);

  // Residual fed to each stage, computed with the pre-update entries.
  std::vector<std::vector<double>> stage_input(books.n_codebooks);
  std::vector<double> residual = latents.storage();
  for (std::size_t i = 0; i < books.n_codebooks; ++i) {
    stage_input[i] = residual;
    subtract_entries(residual, books.entries[i], std::span(codes.values).subspan(i),
                     books.n_codebooks, dim);
  }
  RvqUpdateStats stats;
  double sq = 0.0;
  for (double r : residual) sq += r * r;
  stats.commitment = sq / static_cast<double>(residual.size());

  std::uniform_int_distribution<std::size_t> pick_frame(0, frames - 1);
  const double keep = opts.decay, take = 1.0 - opts.decay;
  for (std::size_t i = 0; i < books.n_codebooks; ++i) {
    std::vector<double> sums(books.codebook_size * dim, 0.0);
    std::vector<std::size_t> counts(books.codebook_size, 0);
    for (std::size_t t = 0; t < frames; ++t) {
      const auto k = static_cast<std::size_t>(codes.at(t, i));
      ++counts[k];
      for (std::size_t d = 0; d < dim; ++d) sums[k * dim + d] += stage_input[i][t * dim + d];
    }
    nn::Tensor& book = books.entries[i];
    auto& usage = books.usage_ema[i];
    for (std::size_t k = 0; k < books.codebook_size; ++k) {
      const double n = static_cast<double>(counts[k]);
      usage[k] = keep * usage[k] +
                 take * n * static_cast<double>(books.codebook_size) / static_cast<double>(frames);
      if (counts[k] > 0) {
        for (std::size_t d = 0; d < dim; ++d) {
          book[k * dim + d] = keep * book[k * dim + d] + take * (sums[k * dim + d] / n);
        }
      }
      if (usage[k] < opts.dead_threshold) {
        const std::size_t src = pick_frame(rng);
        std::copy_n(&stage_input[i][src * dim], dim, &book[k * dim]);
        usage[k] = 1.0;
        ++stats.reinitialized;
      }
    }
  }
  return stats;
}

nn::Var commitment_loss(const nn::Var& latents, const nn::Tensor& quantized) {
  return nn::mse_loss(latents, nn::constant(quantized));
}

// ---------------------------------------------------------------------------

std::size_t FsqSpec::codebook_size() const {
  std::size_t n = 1;
  for (std::size_t l : levels) n *= l;
  return n;
}

void FsqSpec::validate() const {
  if (n_groups == 0) throw std::invalid_argument("FSQ needs at least one group");
  if (levels.empty()) throw std::invalid_argument("FSQ level list is empty");
  for (std::size_t l : levels) {
    if (l < 2) throw std::invalid_argument("FSQ level " + std::to_string(l) + " is below 2");
  }
  if (codebook_size() > 65536) {
    throw std::invalid_argument("FSQ codebook of " + std::to_string(codebook_size()) +
                                " codes exceeds 16-bit codes");
  }
}

std::int32_t pack_digits(std::span<const std::int32_t> digits, std::span<const std::size_t> levels) {
  if (digits.size() != levels.size()) {
    throw std::invalid_argument("pack_digits: " + std::to_string(digits.size()) + " digits for " +
                                std::to_string(levels.size()) + " levels");
  }
  std::int64_t code = 0, radix = 1;
  for (std::size_t j = 0; j < digits.size(); ++j) {
    if (digits[j] < 0 || static_cast<std::size_t>(digits[j]) >= levels[j]) {
      throw std::out_of_range("digit " + std::to_string(j) + " = " + std::to_string(digits[j]) +
                              " outside [0, " + std::to_string(levels[j]) + ")");
    }
    code += digits[j] * radix;
    radix *= static_cast<std::int64_t>(levels[j]);
  }
  return static_cast<std::int32_t>(code);
}

std::vector<std::int32_t> unpack_digits(std::int32_t code, std::span<const std::size_t> levels) {
  std::int64_t total = 1;
  for (std::size_t l : levels) total *= static_cast<std::int64_t>(l);
  if (code < 0 || code >= total) {
    throw std::out_of_range("code " + std::to_string(code) + " outside [0, " +
                            std::to_string(total) + ")");
  }
  std::vector<std::int32_t> digits(levels.size());
  for (std::size_t j = 0; j < levels.size(); ++j) {
    const auto l = static_cast<std::int32_t>(levels[j]);
    digits[j] = code % l;
    code /= l;
  }
  return digits;
}

namespace {

struct LevelBound {
  double h, offset, shift, half;
};

LevelBound level_bound(std::size_t levels) {
  LevelBound b;
  b.h = (static_cast<double>(levels) - 1.0) * (1.0 - 1e-3) / 2.0;
  b.offset = levels % 2 == 0 ? 0.5 : 0.0;
  // Two levels cannot take the shift (offset exceeds h); tanh(z)/2 - 1/2
  // already straddles the single rounding boundary.
  if (levels == 2) b.h = 0.5;
  b.shift = levels == 2 ? 0.0 : std::atanh(b.offset / b.h);
  b.half = static_cast<double>(levels / 2);
  return b;
}

void require_fsq(const nn::Shape& shape, const FsqSpec& spec, const char* who) {
  spec.validate();
  if (shape.size() != 2 || shape[1] != spec.dim()) {
    throw nn::ShapeError(std::string(who) + ": latents " + nn::shape_to_string(shape) +
                         " do not have " + std::to_string(spec.dim()) + " = " +
                         std::to_string(spec.n_groups) + " groups x " +
                         std::to_string(spec.group_dim()) + " columns");
  }
}

}  // namespace

nn::Var fsq_bound(const nn::Var& latents, const FsqSpec& spec) {
  require_fsq(latents.shape(), spec, "fsq_bound");
  const std::size_t gd = spec.group_dim(), dim = spec.dim();
  std::vector<LevelBound> bounds;
  for (std::size_t l : spec.levels) bounds.push_back(level_bound(l));
  const nn::Tensor& z = latents.value();
  nn::Tensor out(z.shape());
  nn::Tensor slope(z.shape());
  for (std::size_t i = 0; i < z.numel(); ++i) {
    const LevelBound& b = bounds[(i % dim) % gd];
    const double th = std::tanh(z[i] + b.shift);
    out[i] = (b.h * th - b.offset) / b.half;
    slope[i] = b.h * (1.0 - th * th) / b.half;
  }
  return nn::make_result(std::move(out), {latents}, [slope = std::move(slope)](nn::Node& self) {
    nn::Node& parent = *self.parents[0];
    if (!parent.requires_grad) return;
    nn::Tensor& g = parent.grad_buffer();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * slope[i];
  });
}

Codes fsq_quantize(const nn::Tensor& bounded, const FsqSpec& spec) {
  require_fsq(bounded.shape(), spec, "fsq_quantize");
  const std::size_t frames = bounded.dim(0), gd = spec.group_dim(), dim = spec.dim();
  Codes codes(frames, spec.n_groups);
  std::vector<std::int32_t> digits(gd);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t g = 0; g < spec.n_groups; ++g) {
      for (std::size_t j = 0; j < gd; ++j) {
        const auto half = static_cast<double>(spec.levels[j] / 2);
        const double top = static_cast<double>(spec.levels[j] - 1) - half;
        const double q = std::clamp(std::round(bounded[t * dim + g * gd + j] * half), -half, top);
        digits[j] = static_cast<std::int32_t>(q + half);
      }
      codes.at(t, g) = pack_digits(digits, spec.levels);
    }
  }
  return codes;
}

std::vector<double> fsq_group_vector(std::int32_t code, const FsqSpec& spec) {
  const auto digits = unpack_digits(code, spec.levels);
  std::vector<double> v(digits.size());
  for (std::size_t j = 0; j < digits.size(); ++j) {
    const auto half = static_cast<double>(spec.levels[j] / 2);
    v[j] = (static_cast<double>(digits[j]) - half) / half;
  }
  return v;
}

nn::Tensor fsq_dequantize(const Codes& codes, const FsqSpec& spec) {
  spec.validate();
  if (codes.n_codebooks != spec.n_groups) {
    throw std::invalid_argument("fsq_dequantize: stream has " + std::to_string(codes.n_codebooks) +
                                " groups, quantizer has " + std::to_string(spec.n_groups));
  }
  check_code_range(codes, spec.codebook_size());
  const std::size_t gd = spec.group_dim(), dim = spec.dim();
  nn::Tensor out({codes.frames, dim});
  for (std::size_t t = 0; t < codes.frames; ++t) {
    for (std::size_t g = 0; g < spec.n_groups; ++g) {
      const auto v = fsq_group_vector(codes.at(t, g), spec);
      std::copy(v.begin(), v.end(), &out[t * dim + g * gd]);
    }
  }
  return out;
}

}  // namespace nac::quant
