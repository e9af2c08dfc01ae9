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

#include <vector>

#include "nacasr/autograd.hpp"

namespace nac::nn {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay. The learning rate is passed per step so
/// the schedule lives outside the optimizer.
class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, AdamWOptions opts = {});

  void step(double lr);
  void zero_grad();
  long steps_taken() const { return step_; }

 private:
  std::vector<Parameter*> params_;
  AdamWOptions opts_;
  std::vector<Tensor> m_, v_;
  long step_ = 0;
};

}  // namespace nac::nn
