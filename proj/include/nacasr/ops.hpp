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

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nacasr/autograd.hpp"

namespace nac::nn {

Var constant(Tensor value);
/// Same value, cut from the graph.
Var detach(const Var& a);

// Elementwise, identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);

Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var elu(const Var& a, double alpha = 1.0);
Var leaky_relu(const Var& a, double slope = 0.2);
Var abs(const Var& a);
Var square(const Var& a);
/// log(a + eps)
Var log(const Var& a, double eps = 0.0);

enum class Activation { elu, leaky_relu, tanh };
Activation parse_activation(const std::string& name);
std::string activation_name(Activation kind);
Var activate(const Var& a, Activation kind);

Var sum(const Var& a);
Var mean(const Var& a);
/// mean(|a - b|)
Var l1_loss(const Var& a, const Var& b);
/// mean((a - b)^2)
Var mse_loss(const Var& a, const Var& b);

Var reshape(const Var& a, Shape shape);
/// 2-D transpose.
Var transpose(const Var& a);
/// Concatenate 2-D values along rows (axis 0); column counts must match.
Var concat_rows(const std::vector<Var>& parts);
/// Rows [begin, end) of a 2-D value.
Var slice_rows(const Var& a, std::size_t begin, std::size_t end);
/// Columns [begin, end) of a 2-D value.
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
/// [A x B x C] -> [A x C], mean over the middle axis.
Var mean_axis1(const Var& a);

struct ConvOptions {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
};

/// input [C_in x T], weight [C_out x C_in x K], bias [C_out] or undefined.
/// Output length floor((T + pads - dilation*(K-1) - 1)/stride) + 1.
Var conv1d(const Var& input, const Var& weight, const Var& bias, ConvOptions opts);

/// input [C_in x T], weight [C_in x C_out x K], bias [C_out] or undefined.
/// Output length stride*(T-1) + K - trim_left - trim_right.
Var conv_transpose1d(const Var& input, const Var& weight, const Var& bias,
                     std::size_t stride, std::size_t trim_left, std::size_t trim_right);

/// input [T x In], weight [Out x In], bias [Out] or undefined -> [T x Out].
Var linear(const Var& input, const Var& weight, const Var& bias);

/// Single-layer LSTM over input [T x D]; gate order (input, forget, cell,
/// output); zero initial state. weight_ih [4H x D], weight_hh [4H x H],
/// bias [4H]. Returns hidden states [T x H].
Var lstm(const Var& input, const Var& weight_ih, const Var& weight_hh, const Var& bias);

/// codes [T x N] row-major, tables[n] [V_n x D] -> [T x N x D].
Var embedding(const std::vector<std::int32_t>& codes, std::size_t n_tables,
              const std::vector<Var>& tables);

/// Forward value `quantized`; backward hands the incoming gradient to
/// `pre_quantized` unchanged.
Var straight_through(const Tensor& quantized, const Var& pre_quantized);

/// Multiplies by a constant mask elementwise.
Var mul_constant(const Var& a, const Tensor& mask);
/// Adds a constant tensor elementwise.
Var add_constant(const Var& a, const Tensor& offset);

}  // namespace nac::nn
