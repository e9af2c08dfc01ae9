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

// Central finite-difference oracle for the differentiable ops. Test-only;
// it touches nothing but leaf values and the scalar the graph produces.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "nacasr/autograd.hpp"

namespace nac::testing {

inline nn::Tensor random_tensor(nn::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                                double hi = 1.0) {
  nn::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

/// Compares analytic gradients of `build()` w.r.t. `leaves` against
/// (f(x+eps) - f(x-eps)) / 2eps. Relative error per coordinate is
/// |a - n| / max(|a|, |n|, floor). At most `max_coords` coordinates per leaf
/// are probed, chosen with `seed`.
inline GradCheckResult grad_check(const std::function<nn::Var()>& build,
                                  std::vector<nn::Var> leaves, double eps = 1e-5,
                                  std::size_t max_coords = 64, std::uint64_t seed = 7,
                                  double floor = 1e-6) {
  for (auto& leaf : leaves) leaf.node()->grad = nn::Tensor();
  nn::Var loss = build();
  nn::backward(loss);
  std::vector<nn::Tensor> analytic;
  for (auto& leaf : leaves) analytic.push_back(leaf.node()->grad_buffer());

  GradCheckResult result;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    nn::Tensor& value = leaves[l].mutable_value();
    std::vector<std::size_t> coords(value.numel());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords);
    }
    for (std::size_t i : coords) {
      const double saved = value[i];
      value[i] = saved + eps;
      const double up = build().value().item();
      value[i] = saved - eps;
      const double down = build().value().item();
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[l][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++result.coords_checked;
    }
  }
  return result;
}

/// Central difference of `build()` w.r.t. one coordinate of `leaf`.
inline double finite_difference(const std::function<nn::Var()>& build, nn::Var leaf,
                                std::size_t index, double eps = 1e-5) {
  nn::Tensor& value = leaf.mutable_value();
  const double saved = value[index];
  value[index] = saved + eps;
  const double up = build().value().item();
  value[index] = saved - eps;
  const double down = build().value().item();
  value[index] = saved;
  return (up - down) / (2.0 * eps);
}

}  // namespace nac::testing
