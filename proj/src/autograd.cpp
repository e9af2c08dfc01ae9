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

#include "nacasr/autograd.hpp"

#include <unordered_set>
#include <utility>

namespace nac::nn {

Tensor& Node::grad_buffer() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var make_result(Tensor value, std::vector<Var> parents,
                std::function<void(Node&)> backward_fn) {
  Var out(std::move(value), false);
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (any) {
    out.node()->requires_grad = true;
    for (auto& p : parents) out.node()->parents.push_back(p.node());
    out.node()->backward_fn = std::move(backward_fn);
  }
  return out;
}

void backward(const Var& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " +
                     shape_to_string(loss.shape()));
  }
  loss.value().check_finite("loss");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS; `order` ends up parents-before-children.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.shape() == node->value.shape()) {
      node->backward_fn(*node);
    }
  }
}

Parameter::Parameter(std::string name, Tensor value)
    : name_(std::move(name)), var_(std::move(value), true) {}

void Parameter::zero_grad() { grad().fill(0.0); }

}  // namespace nac::nn
