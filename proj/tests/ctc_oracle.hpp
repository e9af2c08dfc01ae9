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


// Exhaustive CTC oracle: enumerates every frame path, collapses it and sums
// path probabilities per resulting label sequence.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "nacasr/tensor.hpp"

namespace nac::testing {

using LabelSeq = std::vector<std::int32_t>;

/// Probability of every reachable label sequence for [T x V] logits.
inline std::map<LabelSeq, double> ctc_label_probabilities(const nn::Tensor& logits,
                                                          std::int32_t blank = 0) {
  const std::size_t frames = logits.dim(0), vocab = logits.dim(1);
  std::vector<double> probs(frames * vocab);
  for (std::size_t t = 0; t < frames; ++t) {
    double z = 0.0;
    for (std::size_t k = 0; k < vocab; ++k) z += std::exp(logits[t * vocab + k]);
    for (std::size_t k = 0; k < vocab; ++k) probs[t * vocab + k] = std::exp(logits[t * vocab + k]) / z;
  }
  std::map<LabelSeq, double> out;
  std::vector<std::size_t> path(frames, 0);
  while (true) {
    double p = 1.0;
    LabelSeq collapsed;
    std::int32_t prev = -1;
    for (std::size_t t = 0; t < frames; ++t) {
      p *= probs[t * vocab + path[t]];
      const auto id = static_cast<std::int32_t>(path[t]);
      if (id != prev && id != blank) collapsed.push_back(id);
      prev = id;
    }
    out[collapsed] += p;
    std::size_t t = 0;
    while (t < frames && ++path[t] == vocab) path[t++] = 0;
    if (t == frames) break;
  }
  return out;
}

}  // namespace nac::testing
