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

#include "nacasr/optim.hpp"

#include <cmath>

namespace nac::nn {

AdamW::AdamW(std::vector<Parameter*> params, AdamWOptions opts)
    : params_(std::move(params)), opts_(opts) {
  for (Parameter* p : params_) {
    m_.emplace_back(p->value().shape(), 0.0);
    v_.emplace_back(p->value().shape(), 0.0);
  }
}

void AdamW::step(double lr) {
  ++step_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& value = params_[k]->value();
    const Tensor& grad = params_[k]->grad();
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double g = grad[i];
      m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g;
      v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      value[i] -= lr * opts_.weight_decay * value[i];
      value[i] -= lr * mhat / (std::sqrt(vhat) + opts_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace nac::nn
