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


#include "nacasr/corpus.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace nac::corpus {

std::vector<audio::AudioSignal> make_sine_corpus(const SineCorpusOptions& o) {
  if (o.examples == 0 || o.length == 0) throw std::invalid_argument("corpus must be non-empty");
  if (o.min_sines == 0 || o.min_sines > o.max_sines) throw std::invalid_argument("bad sine count range");
  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<std::size_t> count(o.min_sines, o.max_sines);
  std::uniform_real_distribution<double> freq(o.min_hz, o.max_hz);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<audio::AudioSignal> out(o.examples);
  for (auto& signal : out) {
    const std::size_t n = count(rng);
    std::vector<double> hz(n), ph(n), amp(n);
    for (std::size_t k = 0; k < n; ++k) {
      hz[k] = freq(rng);
      ph[k] = phase(rng);
      amp[k] = 0.8 / static_cast<double>(n) * (0.5 + 0.5 * std::abs(unit(rng)));
    }
    signal.samples.resize(o.length);
    for (std::size_t i = 0; i < o.length; ++i) {
      double v = o.noise * unit(rng);
      for (std::size_t k = 0; k < n; ++k) {
        v += amp[k] * std::sin(2.0 * std::numbers::pi * hz[k] * static_cast<double>(i) / 16000.0 + ph[k]);
      }
      signal.samples[i] = v;
    }
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ManifestEntry e;
    const auto tab = line.find('\t');
    e.wav = line.substr(0, tab);
    if (tab != std::string::npos) e.transcript = line.substr(tab + 1);
    if (e.transcript.find('\t') != std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(number) + ": more than two columns");
    }
    if (e.wav.empty()) throw std::runtime_error(path.string() + ":" + std::to_string(number) + ": empty path");
    if (e.wav.is_relative()) e.wav = base / e.wav;
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  const auto base = path.parent_path();
  for (const auto& e : entries) {
    auto p = e.wav;
    if (!base.empty() && p.is_absolute() == base.is_absolute()) {
      const auto rel = p.lexically_relative(base);
      if (!rel.empty() && *rel.begin() != "..") p = rel;
    }
    out << p.generic_string() << '\t' << e.transcript << '\n';
  }
}

}  // namespace nac::corpus
