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


// Drives the nacasr binary the way an operator would.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nacasr/audio.hpp"
#include "nacasr/code_stream.hpp"

namespace fs = std::filesystem;
using namespace nac;

namespace {

struct Run {
  int code;
  std::string output;
};

Run nacasr(const std::string& args) {
  const std::string cmd = std::string(NACASR_BINARY) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// One scratch directory per process, removed at exit.
struct Scratch {
  fs::path dir = fs::temp_directory_path() / ("nacasr_cli_" + std::to_string(::getpid()));
  Scratch() { fs::create_directories(dir); }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

const Scratch& scratch() {
  static const Scratch s;
  return s;
}

const std::string kSmall =
    " --set codec.base_channels=4 --set quantizer.codebook_size=64 --set training.example_seconds=0.1"
    " --set training.weight_adversarial=0";

std::string trained_codec(const std::string& name, const std::string& extra = "") {
  const auto& s = scratch();
  if (!fs::exists(s / "sine/manifest.tsv")) {
    REQUIRE(nacasr("make-corpus --kind sine --count 4 --length 1600 --seed 1 --out " + (s / "sine")).code == 0);
  }
  const std::string out = s / name;
  if (!fs::exists(out + "/model.nacp")) {
    const auto r = nacasr("codec-train --config " + std::string(NACASR_SOURCE_DIR) + "/configs/toy/td_rvq.cfg --out " +
                          out + " --steps 3 --set training.manifest=" + (s / "sine/manifest.tsv") + kSmall + extra);
    INFO(r.output);
    REQUIRE(r.code == 0);
  }
  return out;
}

}  // namespace

TEST_CASE("codec-train: seeded runs repeat exactly and the echo reproduces them") {
  const auto a = trained_codec("train_a");
  const auto b = trained_codec("train_b");
  CHECK(slurp(a + "/metrics.tsv") == slurp(b + "/metrics.tsv"));
  CHECK(slurp(a + "/model.nacp") == slurp(b + "/model.nacp"));
  const auto c = scratch() / "train_c";
  REQUIRE(nacasr("codec-train --config " + a + "/resolved.cfg --out " + c).code == 0);
  CHECK(slurp(a + "/metrics.tsv") == slurp(c + "/metrics.tsv"));
  const auto d = trained_codec("train_d", " --seed 5");
  CHECK(slurp(a + "/metrics.tsv") != slurp(d + "/metrics.tsv"));
}

TEST_CASE("codec-train: config and numeric failures map to exit codes") {
  const std::string cfg = std::string(NACASR_SOURCE_DIR) + "/configs/toy/td_rvq.cfg";
  const auto missing = nacasr("codec-train --config " + cfg + " --out " + (scratch() / "x") +
                              " --set training.manifest=/does/not/exist.tsv");
  CHECK(missing.code == 2);
  CHECK(missing.output.find("does not exist") != std::string::npos);
  CHECK(nacasr("codec-train --config " + cfg + " --out " + (scratch() / "x") + " --set codec.colour=red").code == 2);
  CHECK(nacasr("codec-train --config /no/such.cfg --out " + (scratch() / "x")).code == 2);
  CHECK(nacasr("codec-train --out " + (scratch() / "x")).code == 2);
  CHECK(nacasr("no-such-command").code == 2);

  trained_codec("train_a");
  const auto nan = nacasr("codec-train --config " + cfg + " --out " + (scratch() / "nan") + " --steps 3" + kSmall +
                          " --set training.manifest=" + (scratch() / "sine/manifest.tsv") +
                          " --set training.lr=1e300 --set training.gamma=1");
  CHECK(nan.code == 3);
  CHECK(nan.output.find("diverged") != std::string::npos);
}

TEST_CASE("encode, inspect and decode a one-second file") {
  const auto model = trained_codec("train_a") + "/model.nacp";
  const auto& s = scratch();
  audio::AudioSignal one;
  one.samples.resize(16000);
  for (std::size_t i = 0; i < one.samples.size(); ++i) one.samples[i] = 0.3 * std::sin(0.05 * static_cast<double>(i));
  audio::write_wav(one, s / "one.wav");

  REQUIRE(nacasr("codec-encode --model " + model + " " + (s / "one.wav") + " " + (s / "one.nacs")).code == 0);
  const auto stream = stream::load_stream(s / "one.nacs");
  CHECK(stream.header.frame_count == 80);
  CHECK(stream.header.original_sample_count == 16000);

  const auto info = nacasr("codec-inspect " + (s / "one.nacs"));
  CHECK(info.code == 0);
  CHECK(info.output.find("frame_count           80") != std::string::npos);
  CHECK(info.output.find("bitrate_bps           3840") != std::string::npos);  // 80 Hz x 8 x 6 bits
  CHECK(nacasr("codec-inspect --histogram " + (s / "one.nacs")).output.size() > info.output.size());

  audio::AudioSignal odd;
  odd.samples.assign(one.samples.begin(), one.samples.begin() + 3333);
  audio::write_wav(odd, s / "odd.wav");
  REQUIRE(nacasr("codec-encode --model " + model + " " + (s / "odd.wav") + " " + (s / "odd.nacs")).code == 0);
  REQUIRE(nacasr("codec-decode --model " + model + " " + (s / "odd.nacs") + " " + (s / "odd_out.wav")).code == 0);
  CHECK(audio::read_wav(s / "odd_out.wav").samples.size() == 3333);

  const auto bytes = slurp(s / "one.nacs");
  std::ofstream(s / "trunc.nacs", std::ios::binary) << bytes.substr(0, 20);
  CHECK(nacasr("codec-inspect " + (s / "trunc.nacs")).code != 0);
}

TEST_CASE("decoding a stream from a different quantizer is refused") {
  const auto rvq = trained_codec("train_a") + "/model.nacp";
  const auto fsq = trained_codec("train_fsq", " --set quantizer.kind=fsq --set codec.latent_dim=32") + "/model.nacp";
  const auto& s = scratch();
  audio::AudioSignal x;
  x.samples.assign(800, 0.1);
  audio::write_wav(x, s / "short.wav");
  REQUIRE(nacasr("codec-encode --model " + fsq + " " + (s / "short.wav") + " " + (s / "fsq.nacs")).code == 0);
  const auto r = nacasr("codec-decode --model " + rvq + " " + (s / "fsq.nacs") + " " + (s / "bad.wav"));
  CHECK(r.code != 0);
  CHECK(r.output.find("fsq") != std::string::npos);
}

TEST_CASE("asr-train and asr-eval on a small synthetic language") {
  const auto codec_ckpt = trained_codec("train_a") + "/model.nacp";
  const auto& s = scratch();
  REQUIRE(nacasr("make-corpus --kind language --count 14 --holdout 4 --out " + (s / "lang")).code == 0);
  const std::string cfg = std::string(NACASR_SOURCE_DIR) + "/configs/toy/asr_language.cfg";
  const std::string common = " --codec " + codec_ckpt + " --config " + cfg + " --epochs 2 --set asr.hidden=8" +
                             " --set asr.manifest=" + (s / "lang/manifest.tsv");

  const auto train = nacasr("asr-train" + common + " --out " + (s / "asr"));
  INFO(train.output);
  REQUIRE(train.code == 0);
  CHECK(slurp(s / "asr/resolved.cfg").find("feature_dim 128") != std::string::npos);

  const auto eval = nacasr("asr-eval --model " + (s / "asr") + " --manifest " + (s / "lang/heldout.tsv"));
  CHECK(eval.code == 0);
  CHECK(eval.output.find("WER ") != std::string::npos);
  CHECK(eval.output.find("CER ") != std::string::npos);
  std::ifstream tsv(s / "asr/eval.tsv");
  std::size_t lines = 0;
  for (std::string line; std::getline(tsv, line);) ++lines;
  CHECK(lines == 5);

  REQUIRE(nacasr("asr-train" + common + " --aggregation stack --out " + (s / "asr_stack")).code == 0);
  CHECK(slurp(s / "asr_stack/resolved.cfg").find("feature_dim 1024") != std::string::npos);

  const auto vocab = nacasr("asr-train" + common + " --set asr.vocabulary=abc --out " + (s / "asr_v"));
  CHECK(vocab.code == 2);
  CHECK(vocab.output.find("'d'") != std::string::npos);
  CHECK(vocab.output.find("'e'") != std::string::npos);
}

TEST_CASE("report prints the closed-form figures") {
  const auto r = nacasr("report");
  CHECK(r.code == 0);
  for (const char* needle : {"TD-NAC RVQ\t80\t8\t1024\t6400", "Mel-NAC RVQ\t125/2\t8\t1024\t5000",
                             "EnCodec 24k\t75\t32\t1024\t24000", "EnCodec 3k\t75\t4\t1024\t3000",
                             "fsq_codebook_size [8 5 5 5]\t1000"}) {
    CHECK(r.output.find(needle) != std::string::npos);
  }
}
