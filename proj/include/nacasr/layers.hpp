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

#include <deque>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "nacasr/autograd.hpp"
#include "nacasr/ops.hpp"

namespace nac::nn {

using Rng = std::mt19937_64;

/// Uniform(-sqrt(3/fan_in), sqrt(3/fan_in)).
Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng);

/// Owner of named parameters and child modules. Parameter names are the
/// dotted path from the root, e.g. "encoder.block0.conv1.weight".
class Module {
 public:
  Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;
  virtual ~Module() = default;

  /// All parameters in registration order, depth first.
  std::vector<Parameter*> parameters();
  std::vector<std::pair<std::string, Parameter*>> named_parameters();
  void zero_grad();
  std::size_t parameter_count();

 protected:
  Parameter& register_parameter(const std::string& name, Tensor value);
  template <typename M, typename... Args>
  M& register_module(const std::string& name, Args&&... args) {
    auto owned = std::make_unique<M>(std::forward<Args>(args)...);
    M& ref = *owned;
    children_.emplace_back(name, std::move(owned));
    return ref;
  }

 private:
  void collect(const std::string& prefix, std::vector<std::pair<std::string, Parameter*>>& out);

  std::deque<Parameter> params_;
  std::vector<std::pair<std::string, std::unique_ptr<Module>>> children_;
};

class Conv1d : public Module {
 public:
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Rng& rng,
         ConvOptions opts = {}, bool bias = true);
  /// Symmetric padding that keeps the length for stride 1.
  static ConvOptions same(std::size_t kernel, std::size_t dilation = 1);

  Var forward(const Var& x) const;
  std::size_t out_channels() const { return weight_->value().dim(0); }

 private:
  Parameter* weight_;
  Parameter* bias_ = nullptr;
  ConvOptions opts_;
};

class ConvTranspose1d : public Module {
 public:
  ConvTranspose1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                  std::size_t stride, std::size_t trim_left, std::size_t trim_right, Rng& rng);
  Var forward(const Var& x) const;

 private:
  Parameter* weight_;
  Parameter* bias_;
  std::size_t stride_, trim_left_, trim_right_;
};

class Linear : public Module {
 public:
  Linear(std::size_t in_features, std::size_t out_features, Rng& rng);
  Var forward(const Var& x) const;

 private:
  Parameter* weight_;
  Parameter* bias_;
};

/// Stack of LSTM layers over [T x D] sequences.
class Lstm : public Module {
 public:
  Lstm(std::size_t input_size, std::size_t hidden_size, std::size_t layers, Rng& rng);
  Var forward(const Var& x) const;

 private:
  struct Layer {
    Parameter* weight_ih;
    Parameter* weight_hh;
    Parameter* bias;
  };
  std::vector<Layer> layers_;
};

/// x + conv_k1(act(conv_k3_dilated(act(x)))); channels preserved.
class ResidualUnit : public Module {
 public:
  ResidualUnit(std::size_t channels, std::size_t hidden, std::size_t dilation,
               Activation act, Rng& rng);
  Var forward(const Var& x) const;

 private:
  Conv1d& conv_dilated_;
  Conv1d& conv_pointwise_;
  Activation act_;
};

}  // namespace nac::nn
