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

// Tape-free reverse mode: every Var owns a node that points at the nodes it
// was computed from. backward() walks that DAG in reverse topological order.

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nacasr/tensor.hpp"

namespace nac::nn {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;

  /// Gradient buffer, zero-initialized on first use.
  Tensor& grad_buffer();
};

/// A value in the differentiable graph.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
  std::size_t numel() const { return node_->value.numel(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Builds a result node. The node only tracks gradients (and keeps its
/// parents alive) when at least one parent requires them.
Var make_result(Tensor value, std::vector<Var> parents,
                std::function<void(Node&)> backward_fn);

/// Seeds d(loss)/d(loss) = 1 and propagates to every reachable leaf.
/// Throws ShapeError for a non-scalar loss and NumericError for a
/// non-finite one.
void backward(const Var& loss);

/// A named trainable leaf.
class Parameter {
 public:
  Parameter(std::string name, Tensor value);

  const std::string& name() const { return name_; }
  const Var& var() const { return var_; }
  Tensor& value() { return var_.node()->value; }
  const Tensor& value() const { return var_.value(); }
  /// Gradient; zeros when nothing has flowed in yet.
  Tensor& grad() { return var_.node()->grad_buffer(); }
  void zero_grad();

 private:
  std::string name_;
  Var var_;
};

}  // namespace nac::nn
