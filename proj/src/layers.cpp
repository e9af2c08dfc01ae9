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

#include "nacasr/layers.hpp"

#include <cmath>
#include <unordered_set>

namespace nac::nn {

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(3.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Parameter& Module::register_parameter(const std::string& name, Tensor value) {
  return params_.emplace_back(name, std::move(value));
}

void Module::collect(const std::string& prefix,
                     std::vector<std::pair<std::string, Parameter*>>& out) {
  for (auto& p : params_) out.emplace_back(prefix + p.name(), &p);
  for (auto& [name, child] : children_) child->collect(prefix + name + ".", out);
}

std::vector<std::pair<std::string, Parameter*>> Module::named_parameters() {
  std::vector<std::pair<std::string, Parameter*>> out;
  collect("", out);
  std::unordered_set<std::string> seen;
  for (const auto& [name, p] : out) {
    if (!seen.insert(name).second) throw std::logic_error("duplicate parameter name: " + name);
  }
  return out;
}

std::vector<Parameter*> Module::parameters() {
  std::vector<Parameter*> out;
  for (auto& [name, p] : named_parameters()) out.push_back(p);
  return out;
}

void Module::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

std::size_t Module::parameter_count() {
  std::size_t n = 0;
  for (Parameter* p : parameters()) n += p->value().numel();
  return n;
}

Conv1d::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               Rng& rng, ConvOptions opts, bool bias)
    : opts_(opts) {
  weight_ = &register_parameter(
      "weight", kaiming_uniform({out_channels, in_channels, kernel}, in_channels * kernel, rng));
  if (bias) bias_ = &register_parameter("bias", Tensor({out_channels}, 0.0));
}

ConvOptions Conv1d::same(std::size_t kernel, std::size_t dilation) {
  const std::size_t total = dilation * (kernel - 1);
  return {1, dilation, total / 2, total - total / 2};
}

Var Conv1d::forward(const Var& x) const {
  return conv1d(x, weight_->var(), bias_ ? bias_->var() : Var{}, opts_);
}

ConvTranspose1d::ConvTranspose1d(std::size_t in_channels, std::size_t out_channels,
                                 std::size_t kernel, std::size_t stride, std::size_t trim_left,
                                 std::size_t trim_right, Rng& rng)
    : stride_(stride), trim_left_(trim_left), trim_right_(trim_right) {
  // Each output sample sees about kernel/stride taps per input channel.
  const std::size_t fan_in = in_channels * std::max<std::size_t>(kernel / stride, 1);
  weight_ = &register_parameter("weight",
                                kaiming_uniform({in_channels, out_channels, kernel}, fan_in, rng));
  bias_ = &register_parameter("bias", Tensor({out_channels}, 0.0));
}

Var ConvTranspose1d::forward(const Var& x) const {
  return conv_transpose1d(x, weight_->var(), bias_->var(), stride_, trim_left_, trim_right_);
}

Linear::Linear(std::size_t in_features, std::size_t out_features, Rng& rng) {
  weight_ = &register_parameter("weight",
                                kaiming_uniform({out_features, in_features}, in_features, rng));
  bias_ = &register_parameter("bias", Tensor({out_features}, 0.0));
}

Var Linear::forward(const Var& x) const { return linear(x, weight_->var(), bias_->var()); }

Lstm::Lstm(std::size_t input_size, std::size_t hidden_size, std::size_t layers, Rng& rng) {
  std::size_t in = input_size;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string suffix = std::to_string(l);
    Layer layer{};
    layer.weight_ih = &register_parameter(
        "weight_ih" + suffix, kaiming_uniform({4 * hidden_size, in}, hidden_size, rng));
    layer.weight_hh = &register_parameter(
        "weight_hh" + suffix, kaiming_uniform({4 * hidden_size, hidden_size}, hidden_size, rng));
    layer.bias = &register_parameter("bias" + suffix, Tensor({4 * hidden_size}, 0.0));
    layers_.push_back(layer);
    in = hidden_size;
  }
}

Var Lstm::forward(const Var& x) const {
  Var h = x;
  for (const auto& layer : layers_) {
    h = lstm(h, layer.weight_ih->var(), layer.weight_hh->var(), layer.bias->var());
  }
  return h;
}

ResidualUnit::ResidualUnit(std::size_t channels, std::size_t hidden, std::size_t dilation,
                           Activation act, Rng& rng)
    : conv_dilated_(register_module<Conv1d>("conv_dilated", channels, hidden, 3, rng,
                                            Conv1d::same(3, dilation))),
      conv_pointwise_(register_module<Conv1d>("conv_pointwise", hidden, channels, 1, rng)),
      act_(act) {}

Var ResidualUnit::forward(const Var& x) const {
  Var h = conv_dilated_.forward(activate(x, act_));
  h = conv_pointwise_.forward(activate(h, act_));
  return add(x, h);
}

}  // namespace nac::nn
