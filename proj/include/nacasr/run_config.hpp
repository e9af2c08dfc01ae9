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


// Run configuration in Boost INFO syntax with sections codec, quantizer,
// training and asr:
//
//   codec { family td  downsample_rates "2 4 5 5" }
//   quantizer { kind rvq  n_codebooks 8 }
//
// Every key has a default, unknown keys are rejected, and resolved() writes
// back a file that reproduces the run on its own.

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "nacasr/asr_training.hpp"
#include "nacasr/codec.hpp"
#include "nacasr/codec_training.hpp"

namespace nac::config {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  codec::CodecConfig codec = codec::td_nac_config(codec::QuantizerKind::rvq);
  train::TrainOptions training;
  std::filesystem::path training_manifest;
  asr::AsrConfig asr;
  std::filesystem::path asr_codec;
  std::filesystem::path asr_manifest;

  /// Validates every section; throws ConfigError.
  void validate() const;
  /// INFO text holding every key.
  std::string resolved() const;
};

/// `overrides` are "section.key=value" strings applied on top of `text`.
/// Relative paths resolve against `base_dir`.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {},
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});

}  // namespace nac::config
