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


// nacasr: train codecs, move audio through code streams, and run the toy
// recognizer. Exit codes: 0 success, 1 runtime failure, 2 usage or config,
// 3 numeric failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nacasr/asr_training.hpp"
#include "nacasr/checkpoint.hpp"
#include "nacasr/code_stream.hpp"
#include "nacasr/codec.hpp"
#include "nacasr/codec_training.hpp"
#include "nacasr/corpus.hpp"
#include "nacasr/run_config.hpp"

namespace fs = std::filesystem;
using namespace nac;
using config::ConfigError;
using config::RunConfig;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

void require_file(const fs::path& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is not set");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " " + path.string() + " does not exist");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

fs::path resolved_path(const fs::path& dir) { return dir / "resolved.cfg"; }

// A checkpoint's configuration is the resolved.cfg written next to it.
std::unique_ptr<codec::Codec> load_codec(const fs::path& checkpoint) {
  require_file(checkpoint, "codec checkpoint");
  const auto cfg_path = resolved_path(checkpoint.parent_path());
  require_file(cfg_path, "codec configuration");
  const RunConfig cfg = config::load_config(cfg_path);
  auto model = std::make_unique<codec::Codec>(cfg.codec, cfg.training.seed);
  model->load_state(nn::read_checkpoint(checkpoint));
  return model;
}

std::vector<std::string> with_flags(std::vector<std::string> sets,
                                    const std::map<std::string, std::string>& flags) {
  for (const auto& [key, value] : flags) {
    if (!value.empty()) sets.push_back(key + "=" + value);
  }
  return sets;
}

// Cuts every file into example_seconds chunks (rounded down to whole frames);
// shorter files are zero-padded to one chunk.
std::vector<audio::AudioSignal> load_training_audio(const RunConfig& cfg) {
  const auto entries = corpus::read_manifest(cfg.training_manifest);
  if (entries.empty()) throw ConfigError("manifest " + cfg.training_manifest.string() + " is empty");
  const std::size_t spf = cfg.codec.samples_per_frame();
  const auto raw = static_cast<std::size_t>(
      std::llround(cfg.training.schedule.example_seconds * cfg.codec.sample_rate));
  const std::size_t length = std::max<std::size_t>(spf, raw / spf * spf);
  std::vector<audio::AudioSignal> out;
  for (const auto& e : entries) {
    const auto wav = audio::read_wav(e.wav);
    if (wav.sample_rate_hz != cfg.codec.sample_rate) {
      throw ConfigError(e.wav.string() + " is " + std::to_string(wav.sample_rate_hz) +
                        " Hz, codec expects " + std::to_string(cfg.codec.sample_rate) + " Hz");
    }
    std::size_t start = 0;
    do {
      audio::AudioSignal chunk;
      chunk.sample_rate_hz = wav.sample_rate_hz;
      const std::size_t end = std::min(wav.samples.size(), start + length);
      chunk.samples.assign(wav.samples.begin() + static_cast<std::ptrdiff_t>(start),
                           wav.samples.begin() + static_cast<std::ptrdiff_t>(end));
      chunk.samples.resize(length, 0.0);
      out.push_back(std::move(chunk));
      start += length;
    } while (start + length <= wav.samples.size());
  }
  return out;
}

int codec_train(const fs::path& config_path, const fs::path& out, const std::vector<std::string>& sets,
                const std::string& steps, const std::string& seed) {
  const RunConfig cfg =
      config::load_config(config_path, with_flags(sets, {{"training.steps", steps}, {"training.seed", seed}}));
  require_file(cfg.training_manifest, "training manifest");
  const auto data = load_training_audio(cfg);
  fs::create_directories(out);
  write_text(resolved_path(out), cfg.resolved());

  codec::Codec model(cfg.codec, cfg.training.seed);
  auto options = cfg.training;
  options.out_dir = out;
  const auto result = train::train_codec(model, data, options);
  std::printf("trained %zu steps on %zu examples\n", result.total_loss.size(), data.size());
  std::printf("loss_total first %.6g last %.6g\n", result.total_loss.front(), result.total_loss.back());
  std::printf("usage_entropy_bits last %.6g\n", result.usage_entropy.back());
  std::printf("checkpoint %s\n", (out / "model.nacp").c_str());
  return 0;
}

int codec_encode(const fs::path& model_path, const fs::path& in, const fs::path& out) {
  const auto model = load_codec(model_path);
  const auto stream = model->make_stream(audio::read_wav(in));
  stream::save_stream(stream, out);
  std::printf("%llu samples -> %llu frames x %u codebooks\n",
              static_cast<unsigned long long>(stream.header.original_sample_count),
              static_cast<unsigned long long>(stream.header.frame_count), stream.header.n_codebooks);
  return 0;
}

int codec_decode(const fs::path& model_path, const fs::path& in, const fs::path& out) {
  const auto model = load_codec(model_path);
  const auto stream = stream::load_stream(in);
  model->check_stream(stream.header);
  const auto wav = model->decode_audio(stream.codes, stream.header.original_sample_count);
  audio::write_wav(wav, out);
  std::printf("%llu frames -> %zu samples\n", static_cast<unsigned long long>(stream.header.frame_count),
              wav.samples.size());
  return 0;
}

int codec_inspect(const fs::path& in, bool histogram) {
  const auto s = stream::load_stream(in);
  const auto& h = s.header;
  const Rational rate(h.sample_rate, h.samples_per_frame);
  std::printf("quantizer             %s\n", stream::quantizer_name(h.quantizer));
  std::printf("sample_rate           %u\n", h.sample_rate);
  std::printf("samples_per_frame     %u\n", h.samples_per_frame);
  std::printf("frame_rate_hz         %s\n", rate.to_string().c_str());
  std::printf("n_codebooks           %u\n", h.n_codebooks);
  std::printf("codebook_size         %u\n", h.codebook_size);
  std::printf("original_sample_count %llu\n", static_cast<unsigned long long>(h.original_sample_count));
  std::printf("frame_count           %llu\n", static_cast<unsigned long long>(h.frame_count));
  std::printf("bitrate_bps           %s\n",
              stream::bitrate_bps_exact(rate, h.n_codebooks, h.codebook_size).to_string().c_str());
  std::printf("information_rate_bps  %.4f\n", stream::information_rate_bps(rate, h.n_codebooks, h.codebook_size));
  for (std::size_t i = 0; i < h.n_codebooks; ++i) {
    std::map<std::int32_t, std::size_t> counts;
    for (std::size_t t = 0; t < s.codes.frames; ++t) ++counts[s.codes.at(t, i)];
    std::printf("codebook %zu: %zu distinct codes, usage entropy %.4f bits\n", i, counts.size(),
                s.codes.frames ? quant::usage_entropy_bits(s.codes, i, h.codebook_size) : 0.0);
    if (histogram) {
      for (const auto& [code, n] : counts) std::printf("  %d\t%zu\n", code, n);
    }
  }
  return 0;
}

std::vector<asr::AsrExample> load_asr_examples(const codec::Codec& model, const fs::path& manifest,
                                               const asr::Vocabulary& vocab) {
  require_file(manifest, "manifest");
  const auto entries = corpus::read_manifest(manifest);
  if (entries.empty()) throw ConfigError("manifest " + manifest.string() + " is empty");
  std::string all_text;
  for (const auto& e : entries) all_text += e.transcript;
  try {
    vocab.encode(all_text);
  } catch (const std::invalid_argument& err) {
    throw ConfigError(manifest.string() + ": " + err.what());
  }
  std::vector<asr::Utterance> utts;
  for (const auto& e : entries) utts.push_back({audio::read_wav(e.wav), e.transcript});
  return asr::encode_utterances(model, utts);
}

int asr_train(const fs::path& codec_path, const fs::path& config_path, const fs::path& out,
              const std::vector<std::string>& sets, const std::map<std::string, std::string>& flags) {
  auto all = flags;
  all["asr.codec"] = codec_path.empty() ? "" : fs::absolute(codec_path).string();
  RunConfig cfg = config::load_config(config_path, with_flags(sets, all));
  const auto model = load_codec(cfg.asr_codec);
  cfg.codec = model->config();
  cfg.validate();
  const asr::Vocabulary vocab(cfg.asr.vocabulary);
  const auto data = load_asr_examples(*model, cfg.asr_manifest, vocab);
  fs::create_directories(out);
  write_text(resolved_path(out), cfg.resolved());

  asr::AsrModel net(cfg.asr, cfg.codec.n_codebooks, cfg.codec.effective_codebook_size());
  if (cfg.asr.codebook_init) asr::init_from_codebooks(net.tables(), *model);
  const auto losses = asr::train_asr(net, data);
  std::ofstream log(out / "metrics.tsv", std::ios::trunc);
  char line[96];
  for (std::size_t e = 0; e < losses.size(); ++e) {
    std::snprintf(line, sizeof line, "%zu\tloss_ctc\t%.17g\n", e + 1, losses[e]);
    log << line;
  }
  nn::write_checkpoint(out / "model.nacp", nn::module_records(net));
  std::printf("feature_dim %zu (%s)\n", net.feature_dim(), asr::aggregation_name(cfg.asr.aggregation).c_str());
  std::printf("loss_ctc first %.6g last %.6g\n", losses.front(), losses.back());
  const auto train_eval = asr::evaluate_asr(net, data);
  std::printf("train WER %.4f CER %.4f\n", train_eval.word_errors.rate(), train_eval.char_errors.rate());
  return 0;
}

int asr_eval(const fs::path& model_dir, const fs::path& manifest, fs::path out) {
  const auto cfg_path = resolved_path(model_dir);
  require_file(cfg_path, "model configuration");
  const RunConfig cfg = config::load_config(cfg_path);
  const auto model = load_codec(cfg.asr_codec);
  asr::AsrModel net(cfg.asr, model->config().n_codebooks, model->config().effective_codebook_size());
  require_file(model_dir / "model.nacp", "model checkpoint");
  nn::load_module(net, nn::read_checkpoint(model_dir / "model.nacp"));
  const auto entries = corpus::read_manifest(manifest);
  const auto data = load_asr_examples(*model, manifest, net.vocabulary());
  const auto result = asr::evaluate_asr(net, data);

  if (out.empty()) out = model_dir / "eval.tsv";
  std::ofstream tsv(out, std::ios::trunc);
  tsv << "wav\treference\thypothesis\tword_edits\treference_words\tchar_edits\treference_chars\n";
  for (std::size_t i = 0; i < result.utterances.size(); ++i) {
    const auto& u = result.utterances[i];
    tsv << entries[i].wav.string() << '\t' << u.reference << '\t' << u.hypothesis << '\t'
        << u.word_errors.edits << '\t' << u.word_errors.reference_length << '\t' << u.char_errors.edits
        << '\t' << u.char_errors.reference_length << '\n';
  }
  if (!tsv) throw std::runtime_error("cannot write " + out.string());
  std::printf("utterances %zu\n", result.utterances.size());
  std::printf("WER %.4f (%zu/%zu)\n", result.word_errors.rate(), result.word_errors.edits,
              result.word_errors.reference_length);
  std::printf("CER %.4f (%zu/%zu)\n", result.char_errors.rate(), result.char_errors.edits,
              result.char_errors.reference_length);
  return 0;
}

int make_corpus(const std::string& kind, const fs::path& out, std::size_t count, std::uint64_t seed,
                std::size_t length, std::size_t samples_per_frame, std::size_t holdout) {
  if (holdout >= count) throw ConfigError("--holdout must be smaller than --count");
  std::vector<audio::AudioSignal> audio;
  std::vector<std::string> transcripts;
  if (kind == "sine") {
    corpus::SineCorpusOptions o;
    o.examples = count;
    o.length = length;
    o.seed = seed;
    audio = corpus::make_sine_corpus(o);
    transcripts.resize(audio.size());
  } else {
    asr::SyntheticLanguageOptions o;
    o.utterances = count;
    o.seed = seed;
    for (auto& u : asr::make_synthetic_language(o, samples_per_frame)) {
      audio.push_back(std::move(u.audio));
      transcripts.push_back(std::move(u.transcript));
    }
  }
  fs::create_directories(out);
  std::vector<corpus::ManifestEntry> entries;
  for (std::size_t i = 0; i < audio.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%04zu.wav", i);
    audio::write_wav(audio[i], out / name);
    entries.push_back({name, transcripts[i]});
  }
  const auto split = entries.begin() + static_cast<std::ptrdiff_t>(entries.size() - holdout);
  corpus::write_manifest(out / "manifest.tsv", {entries.begin(), split});
  std::printf("wrote %zu files, %zu in %s\n", entries.size(), entries.size() - holdout,
              (out / "manifest.tsv").c_str());
  if (holdout > 0) {
    corpus::write_manifest(out / "heldout.tsv", {split, entries.end()});
    std::printf("%zu held out in %s\n", holdout, (out / "heldout.tsv").c_str());
  }
  return 0;
}

int report() {
  const auto rate = [](std::uint32_t sr, std::uint32_t spf) { return Rational(sr, spf); };
  struct Row {
    const char* name;
    Rational frame_rate;
    std::uint32_t n_codebooks, codebook_size;
  };
  const Row rows[] = {
      {"TD-NAC RVQ", rate(16000, 200), 8, 1024},   {"TD-NAC FSQ", rate(16000, 200), 8, 1000},
      {"Mel-NAC RVQ", rate(16000, 256), 8, 1024},  {"Mel-NAC FSQ", rate(16000, 256), 8, 1000},
      {"EnCodec 24k", rate(24000, 320), 32, 1024}, {"EnCodec 12k", rate(24000, 320), 16, 1024},
      {"EnCodec 6k", rate(24000, 320), 8, 1024},   {"EnCodec 3k", rate(24000, 320), 4, 1024},
  };
  std::printf("codec\tframe_rate_hz\tn_codebooks\tcodebook_size\tbitrate_bps\tinformation_rate_bps\n");
  for (const auto& r : rows) {
    std::printf("%s\t%s\t%u\t%u\t%s\t%.1f\n", r.name, r.frame_rate.to_string().c_str(), r.n_codebooks,
                r.codebook_size,
                stream::bitrate_bps_exact(r.frame_rate, r.n_codebooks, r.codebook_size).to_string().c_str(),
                stream::information_rate_bps(r.frame_rate, r.n_codebooks, r.codebook_size));
  }
  const auto td = codec::td_nac_config(codec::QuantizerKind::rvq);
  const auto mel = codec::mel_nac_config(codec::QuantizerKind::rvq);
  std::printf("\nfsq_codebook_size [8 5 5 5]\t%zu\n", quant::FsqSpec{}.codebook_size());
  std::printf("td_samples_per_frame\t%zu\n", td.samples_per_frame());
  std::printf("mel_decoder_upsampling\t%zu\n", mel.samples_per_frame());
  std::printf("td_frames_per_second\t%s\n", td.frame_rate().to_string().c_str());
  std::printf("mel_frames_per_second\t%s\n", mel.frame_rate().to_string().c_str());
  train::TrainSchedule sched;
  std::printf("lr_at_step(0)\t%.10g\n", train::lr_at_step(sched, 0));
  std::printf("lr_at_step(130000)\t%.10g\n", train::lr_at_step(sched, 130000));
  std::printf("noise_sup_bound(alpha=5,T=100,D=128)\t%.6f\n", 5.0 / std::sqrt(100.0 * 128.0));
  std::printf("feature_dim stack (N_cb=8, D_emb=128)\t%zu\n", asr::aggregated_dim(asr::Aggregation::stack, 8, 128));
  std::printf("feature_dim avg (N_cb=8, D_emb=128)\t%zu\n", asr::aggregated_dim(asr::Aggregation::avg, 8, 128));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural audio codecs and discrete-code ASR"};
  app.require_subcommand(1);
  std::function<int()> run;

  std::vector<std::string> sets;
  const auto add_sets = [&](CLI::App* sub) {
    sub->add_option("--set", sets, "Config override, section.key=value (repeatable)");
  };

  fs::path config_path, out, model_path, in_path, codec_path, manifest;
  std::string steps, seed, aggregation, epochs;

  auto* train = app.add_subcommand("codec-train", "Train a codec from a config");
  train->add_option("--config", config_path)->required();
  train->add_option("--out", out)->required();
  train->add_option("--steps", steps);
  train->add_option("--seed", seed);
  add_sets(train);
  train->callback([&] { run = [&] { return codec_train(config_path, out, sets, steps, seed); }; });

  auto* enc = app.add_subcommand("codec-encode", "Encode a wav file into a code stream");
  enc->add_option("--model", model_path)->required();
  enc->add_option("input", in_path)->required();
  enc->add_option("output", out)->required();
  enc->callback([&] { run = [&] { return codec_encode(model_path, in_path, out); }; });

  auto* dec = app.add_subcommand("codec-decode", "Decode a code stream into a wav file");
  dec->add_option("--model", model_path)->required();
  dec->add_option("input", in_path)->required();
  dec->add_option("output", out)->required();
  dec->callback([&] { run = [&] { return codec_decode(model_path, in_path, out); }; });

  bool histogram = false;
  auto* inspect = app.add_subcommand("codec-inspect", "Print stream header, bitrate and code usage");
  inspect->add_option("input", in_path)->required();
  inspect->add_flag("--histogram", histogram, "Print every code count");
  inspect->callback([&] { run = [&] { return codec_inspect(in_path, histogram); }; });

  auto* atrain = app.add_subcommand("asr-train", "Train the toy recognizer on frozen codec codes");
  atrain->add_option("--codec", codec_path)->required();
  atrain->add_option("--config", config_path)->required();
  atrain->add_option("--out", out)->required();
  atrain->add_option("--aggregation", aggregation);
  atrain->add_option("--epochs", epochs);
  atrain->add_option("--seed", seed);
  add_sets(atrain);
  atrain->callback([&] {
    run = [&] {
      return asr_train(codec_path, config_path, out, sets,
                       {{"asr.aggregation", aggregation}, {"asr.epochs", epochs}, {"asr.seed", seed}});
    };
  });

  fs::path tsv;
  auto* aeval = app.add_subcommand("asr-eval", "Report WER and CER of a trained recognizer");
  aeval->add_option("--model", model_path, "Directory written by asr-train")->required();
  aeval->add_option("--manifest", manifest)->required();
  aeval->add_option("--out", tsv, "Per-utterance TSV (default MODEL/eval.tsv)");
  aeval->callback([&] { run = [&] { return asr_eval(model_path, manifest, tsv); }; });

  std::string kind = "sine";
  std::size_t count = 16, length = 16000, spf = 200, holdout = 0;
  std::uint64_t corpus_seed = 0;
  auto* mk = app.add_subcommand("make-corpus", "Write a synthetic corpus and manifest");
  mk->add_option("--kind", kind)->check(CLI::IsMember({"sine", "language"}));
  mk->add_option("--out", out)->required();
  mk->add_option("--count", count);
  mk->add_option("--seed", corpus_seed);
  mk->add_option("--length", length, "Samples per sine example");
  mk->add_option("--samples-per-frame", spf, "Codec frame size the language is laid out on");
  mk->add_option("--holdout", holdout, "Trailing files listed in heldout.tsv instead of manifest.tsv");
  mk->callback([&] { run = [&] { return make_corpus(kind, out, count, corpus_seed, length, spf, holdout); }; });

  auto* rep = app.add_subcommand("report", "Print the closed-form numbers the implementation reproduces");
  rep->callback([&] { run = [] { return report(); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  try {
    return run();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const train::TrainingDiverged& e) {
    std::fprintf(stderr, "training diverged at step %zu; last good checkpoint: %s\n", e.step(),
                 e.last_good_checkpoint().empty() ? "none" : e.last_good_checkpoint().c_str());
    return kExitNumeric;
  } catch (const nn::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
