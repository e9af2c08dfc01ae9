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


// Seeded synthetic audio and TSV manifests (`wav_path<TAB>transcript`).

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nacasr/audio.hpp"

namespace nac::corpus {

struct SineCorpusOptions {
  std::size_t examples = 16;
  std::size_t length = 16000;
  std::size_t min_sines = 2;
  std::size_t max_sines = 5;
  double min_hz = 100.0;
  double max_hz = 2000.0;
  double noise = 0.01;  // uniform noise amplitude
  std::uint64_t seed = 0;
};

/// Mixtures of sines plus uniform noise, peak amplitude below 0.9.
std::vector<audio::AudioSignal> make_sine_corpus(const SineCorpusOptions& options);

struct ManifestEntry {
  std::filesystem::path wav;
  std::string transcript;
};

/// Relative wav paths resolve against the manifest's directory. The
/// transcript column may be missing. Throws std::runtime_error with the line
/// number on malformed input.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

}  // namespace nac::corpus
