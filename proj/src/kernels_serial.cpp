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

// Reference kernels: one output element at a time, no blocking, no threads.

#include <limits>
#include <stdexcept>
#include <string>

#include "nacasr/kernels.hpp"

namespace nac::kernels {

std::size_t ConvGeometry::out_length() const {
  if (stride == 0 || dilation == 0 || kernel == 0) {
    throw std::invalid_argument("conv geometry: stride, dilation and kernel must be >= 1");
  }
  const std::size_t span = dilation * (kernel - 1) + 1;
  const std::size_t padded = in_length + pad_left + pad_right;
  if (padded < span) {
    throw std::invalid_argument("conv geometry: kernel span " + std::to_string(span) +
                                " exceeds padded length " + std::to_string(padded));
  }
  return (padded - span) / stride + 1;
}

namespace serial {

void conv1d_forward(const ConvGeometry& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias,
                    std::span<double> y) {
  const std::size_t out_len = g.out_length();
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    for (std::size_t t = 0; t < out_len; ++t) {
      double acc = bias.empty() ? 0.0 : bias[o];
      for (std::size_t i = 0; i < g.in_channels; ++i) {
        for (std::size_t j = 0; j < g.kernel; ++j) {
          const auto u = static_cast<std::ptrdiff_t>(t * g.stride + j * g.dilation) -
                         static_cast<std::ptrdiff_t>(g.pad_left);
          if (u < 0 || u >= static_cast<std::ptrdiff_t>(g.in_length)) continue;
          acc += w[(o * g.in_channels + i) * g.kernel + j] * x[i * g.in_length + u];
        }
      }
      y[o * out_len + t] = acc;
    }
  }
}

void conv1d_backward_input(const ConvGeometry& g, std::span<const double> gy,
                           std::span<const double> w, std::span<double> gx) {
  const std::size_t out_len = g.out_length();
  for (std::size_t i = 0; i < g.in_channels; ++i) {
    for (std::size_t u = 0; u < g.in_length; ++u) {
      double acc = 0.0;
      for (std::size_t o = 0; o < g.out_channels; ++o) {
        for (std::size_t j = 0; j < g.kernel; ++j) {
          const auto num = static_cast<std::ptrdiff_t>(u + g.pad_left) -
                           static_cast<std::ptrdiff_t>(j * g.dilation);
          if (num < 0 || num % static_cast<std::ptrdiff_t>(g.stride) != 0) continue;
          const auto t = static_cast<std::size_t>(num) / g.stride;
          if (t >= out_len) continue;
          acc += w[(o * g.in_channels + i) * g.kernel + j] * gy[o * out_len + t];
        }
      }
      gx[i * g.in_length + u] += acc;
    }
  }
}

void conv1d_backward_weight(const ConvGeometry& g, std::span<const double> gy,
                            std::span<const double> x, std::span<double> gw,
                            std::span<double> gb) {
  const std::size_t out_len = g.out_length();
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    if (!gb.empty()) {
      double acc = 0.0;
      for (std::size_t t = 0; t < out_len; ++t) acc += gy[o * out_len + t];
      gb[o] += acc;
    }
    for (std::size_t i = 0; i < g.in_channels; ++i) {
      for (std::size_t j = 0; j < g.kernel; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < out_len; ++t) {
          const auto u = static_cast<std::ptrdiff_t>(t * g.stride + j * g.dilation) -
                         static_cast<std::ptrdiff_t>(g.pad_left);
          if (u < 0 || u >= static_cast<std::ptrdiff_t>(g.in_length)) continue;
          acc += gy[o * out_len + t] * x[i * g.in_length + u];
        }
        gw[(o * g.in_channels + i) * g.kernel + j] += acc;
      }
    }
  }
}

void matmul_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
               std::span<const double> b, std::span<double> c) {
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t col = 0; col < n; ++col) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[r * k + p] * b[col * k + p];
      c[r * n + col] += acc;
    }
  }
}

void matmul_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
               std::span<const double> b, std::span<double> c) {
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t col = 0; col < n; ++col) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[r * k + p] * b[p * n + col];
      c[r * n + col] += acc;
    }
  }
}

void matmul_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
               std::span<const double> b, std::span<double> c) {
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t col = 0; col < n; ++col) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + r] * b[p * n + col];
      c[r * n + col] += acc;
    }
  }
}

void nearest_rows(std::size_t count, std::size_t dim, std::span<const double> queries,
                  std::size_t book_size, std::span<const double> book,
                  std::span<std::int32_t> out) {
  for (std::size_t q = 0; q < count; ++q) {
    double best = std::numeric_limits<double>::infinity();
    std::int32_t best_index = 0;
    for (std::size_t e = 0; e < book_size; ++e) {
      double d = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = queries[q * dim + c] - book[e * dim + c];
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        best_index = static_cast<std::int32_t>(e);
      }
    }
    out[q] = best_index;
  }
}

}  // namespace serial
}  // namespace nac::kernels
