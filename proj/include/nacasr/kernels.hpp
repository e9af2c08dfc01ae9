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

// Dense numeric kernels behind the differentiable ops.
//
// Every kernel exists twice: nac::kernels::serial holds the plain loop nest
// used as the test reference, nac::kernels holds the OpenMP version used by
// the models. Both accumulate each output element in the same order, so the
// two agree bit-for-bit and results do not depend on the thread count.
//
// Layouts: signals are [channels x length] row-major; conv weights are
// [out_channels x in_channels x kernel]; dense weights are [out x in].

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nac::kernels {

struct ConvGeometry {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
  std::size_t in_length = 0;

  /// floor((T + pads - dilation*(kernel-1) - 1) / stride) + 1.
  /// Throws std::invalid_argument when the kernel does not fit.
  std::size_t out_length() const;
};

// y = conv(x, w) + bias. `bias` may be empty.
void conv1d_forward(const ConvGeometry& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias,
                    std::span<double> y);
// gx += conv^T(gy, w)
void conv1d_backward_input(const ConvGeometry& g, std::span<const double> gy,
                           std::span<const double> w, std::span<double> gx);
// gw += dL/dw, gb += dL/db (gb may be empty)
void conv1d_backward_weight(const ConvGeometry& g, std::span<const double> gy,
                            std::span<const double> x, std::span<double> gw,
                            std::span<double> gb);

// c[m x n] += a[m x k] * b[n x k]^T
void matmul_nt(std::size_t m, std::size_t k, std::size_t n,
               std::span<const double> a, std::span<const double> b,
               std::span<double> c);
// c[m x n] += a[m x k] * b[k x n]
void matmul_nn(std::size_t m, std::size_t k, std::size_t n,
               std::span<const double> a, std::span<const double> b,
               std::span<double> c);
// c[m x n] += a[k x m]^T * b[k x n]
void matmul_tn(std::size_t m, std::size_t k, std::size_t n,
               std::span<const double> a, std::span<const double> b,
               std::span<double> c);

/// For each of `count` query rows of width `dim`, the index of the nearest
/// codebook row in squared L2. Ties resolve to the smallest index.
void nearest_rows(std::size_t count, std::size_t dim, std::span<const double> queries,
                  std::size_t book_size, std::span<const double> book,
                  std::span<std::int32_t> out);

namespace serial {

void conv1d_forward(const ConvGeometry& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias,
                    std::span<double> y);
void conv1d_backward_input(const ConvGeometry& g, std::span<const double> gy,
                           std::span<const double> w, std::span<double> gx);
void conv1d_backward_weight(const ConvGeometry& g, std::span<const double> gy,
                            std::span<const double> x, std::span<double> gw,
                            std::span<double> gb);
void matmul_nt(std::size_t m, std::size_t k, std::size_t n,
               std::span<const double> a, std::span<const double> b,
               std::span<double> c);
void matmul_nn(std::size_t m, std::size_t k, std::size_t n,
               std::span<const double> a, std::span<const double> b,
               std::span<double> c);
void matmul_tn(std::size_t m, std::size_t k, std::size_t n,
               std::span<const double> a, std::span<const double> b,
               std::span<double> c);
void nearest_rows(std::size_t count, std::size_t dim, std::span<const double> queries,
                  std::size_t book_size, std::span<const double> book,
                  std::span<std::int32_t> out);

}  // namespace serial

}  // namespace nac::kernels
