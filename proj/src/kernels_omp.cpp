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

// Threaded kernels. Each thread owns whole output rows, and inside a row the
// accumulation order matches the serial reference term by term.

#include <omp.h>

#include <algorithm>
#include <limits>
#include <vector>

#include "nacasr/kernels.hpp"

namespace nac::kernels {
namespace {

// Half-open range of output positions t for which t*stride + offset lands in
// [0, length). `offset` may be negative.
struct TapRange {
  std::size_t begin;
  std::size_t end;
};

TapRange valid_taps(std::ptrdiff_t offset, std::size_t stride, std::size_t length,
                    std::size_t out_len) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  std::ptrdiff_t lo = 0;
  if (offset < 0) lo = (-offset + s - 1) / s;
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(length) - 1 - offset;
  if (last < 0) return {0, 0};
  const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(last / s + 1,
                                                     static_cast<std::ptrdiff_t>(out_len));
  if (hi <= lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

void conv1d_forward(const ConvGeometry& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias,
                    std::span<double> y) {
  const std::size_t out_len = g.out_length();
  const auto out_ch = static_cast<std::ptrdiff_t>(g.out_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t oo = 0; oo < out_ch; ++oo) {
    const auto o = static_cast<std::size_t>(oo);
    double* row = y.data() + o * out_len;
    std::fill(row, row + out_len, bias.empty() ? 0.0 : bias[o]);
    for (std::size_t i = 0; i < g.in_channels; ++i) {
      const double* xi = x.data() + i * g.in_length;
      for (std::size_t j = 0; j < g.kernel; ++j) {
        const double wv = w[(o * g.in_channels + i) * g.kernel + j];
        const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(j * g.dilation) -
                                      static_cast<std::ptrdiff_t>(g.pad_left);
        const auto [tb, te] = valid_taps(offset, g.stride, g.in_length, out_len);
        if (g.stride == 1) {
          const double* src = xi + offset;
          for (std::size_t t = tb; t < te; ++t) row[t] += wv * src[t];
        } else {
          for (std::size_t t = tb; t < te; ++t) {
            row[t] += wv * xi[static_cast<std::ptrdiff_t>(t * g.stride) + offset];
          }
        }
      }
    }
  }
}

void conv1d_backward_input(const ConvGeometry& g, std::span<const double> gy,
                           std::span<const double> w, std::span<double> gx) {
  const std::size_t out_len = g.out_length();
  const auto in_ch = static_cast<std::ptrdiff_t>(g.in_channels);
#pragma omp parallel
  {
    std::vector<double> tmp(g.in_length);
#pragma omp for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < in_ch; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      std::fill(tmp.begin(), tmp.end(), 0.0);
      for (std::size_t o = 0; o < g.out_channels; ++o) {
        const double* go = gy.data() + o * out_len;
        for (std::size_t j = 0; j < g.kernel; ++j) {
          const double wv = w[(o * g.in_channels + i) * g.kernel + j];
          const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(j * g.dilation) -
                                        static_cast<std::ptrdiff_t>(g.pad_left);
          const auto [tb, te] = valid_taps(offset, g.stride, g.in_length, out_len);
          for (std::size_t t = tb; t < te; ++t) {
            tmp[static_cast<std::ptrdiff_t>(t * g.stride) + offset] += wv * go[t];
          }
        }
      }
      double* dst = gx.data() + i * g.in_length;
      for (std::size_t u = 0; u < g.in_length; ++u) dst[u] += tmp[u];
    }
  }
}

void conv1d_backward_weight(const ConvGeometry& g, std::span<const double> gy,
                            std::span<const double> x, std::span<double> gw,
                            std::span<double> gb) {
  const std::size_t out_len = g.out_length();
  const auto out_ch = static_cast<std::ptrdiff_t>(g.out_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t oo = 0; oo < out_ch; ++oo) {
    const auto o = static_cast<std::size_t>(oo);
    const double* go = gy.data() + o * out_len;
    if (!gb.empty()) {
      double acc = 0.0;
      for (std::size_t t = 0; t < out_len; ++t) acc += go[t];
      gb[o] += acc;
    }
    for (std::size_t i = 0; i < g.in_channels; ++i) {
      const double* xi = x.data() + i * g.in_length;
      for (std::size_t j = 0; j < g.kernel; ++j) {
        const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(j * g.dilation) -
                                      static_cast<std::ptrdiff_t>(g.pad_left);
        const auto [tb, te] = valid_taps(offset, g.stride, g.in_length, out_len);
        double acc = 0.0;
        for (std::size_t t = tb; t < te; ++t) {
          acc += go[t] * xi[static_cast<std::ptrdiff_t>(t * g.stride) + offset];
        }
        gw[(o * g.in_channels + i) * g.kernel + j] += acc;
      }
    }
  }
}

void matmul_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
               std::span<const double> b, std::span<double> c) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t rr = 0; rr < rows; ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    const double* ar = a.data() + r * k;
    for (std::size_t col = 0; col < n; ++col) {
      const double* bc = b.data() + col * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ar[p] * bc[p];
      c[r * n + col] += acc;
    }
  }
}

void matmul_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
               std::span<const double> b, std::span<double> c) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel
  {
    std::vector<double> tmp(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t rr = 0; rr < rows; ++rr) {
      const auto r = static_cast<std::size_t>(rr);
      std::fill(tmp.begin(), tmp.end(), 0.0);
      for (std::size_t p = 0; p < k; ++p) {
        const double av = a[r * k + p];
        const double* bp = b.data() + p * n;
        for (std::size_t col = 0; col < n; ++col) tmp[col] += av * bp[col];
      }
      for (std::size_t col = 0; col < n; ++col) c[r * n + col] += tmp[col];
    }
  }
}

void matmul_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
               std::span<const double> b, std::span<double> c) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel
  {
    std::vector<double> tmp(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t rr = 0; rr < rows; ++rr) {
      const auto r = static_cast<std::size_t>(rr);
      std::fill(tmp.begin(), tmp.end(), 0.0);
      for (std::size_t p = 0; p < k; ++p) {
        const double av = a[p * m + r];
        const double* bp = b.data() + p * n;
        for (std::size_t col = 0; col < n; ++col) tmp[col] += av * bp[col];
      }
      for (std::size_t col = 0; col < n; ++col) c[r * n + col] += tmp[col];
    }
  }
}

void nearest_rows(std::size_t count, std::size_t dim, std::span<const double> queries,
                  std::size_t book_size, std::span<const double> book,
                  std::span<std::int32_t> out) {
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t qq = 0; qq < n; ++qq) {
    const auto q = static_cast<std::size_t>(qq);
    const double* query = queries.data() + q * dim;
    double best = std::numeric_limits<double>::infinity();
    std::int32_t best_index = 0;
    for (std::size_t e = 0; e < book_size; ++e) {
      const double* entry = book.data() + e * dim;
      double d = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = query[c] - entry[c];
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

}  // namespace nac::kernels
