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


#include "nacasr/run_config.hpp"

#include <boost/property_tree/info_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "nacasr/ops.hpp"

namespace nac::config {

namespace pt = boost::property_tree;

namespace {

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    throw ConfigError(key + ": cannot parse '" + text + "' as a number");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  std::vector<std::size_t> out;
  std::string item;
  while (in >> item) out.push_back(parse_number<std::size_t>(key, item));
  if (out.empty()) throw ConfigError(key + ": expected a space-separated list of integers");
  return out;
}

std::string format_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (const auto x : v) out += (out.empty() ? "" : " ") + std::to_string(x);
  return out;
}

template <typename E, typename F>
E parse_enum(const std::string& key, const std::string& text, F parse) {
  try {
    return parse(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::filesystem::path resolve_path(const std::string& text, const std::filesystem::path& base) {
  if (text.empty()) return {};
  std::filesystem::path p(text);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> read;
  std::function<std::string(const RunConfig&)> write;
};

using FieldTable = std::vector<std::pair<std::string, Field>>;

#define NAC_SIZE(path, member)                                                                 \
  {                                                                                            \
    path, {                                                                                    \
      [](RunConfig& c, const std::string& k, const std::string& v) {                           \
        c.member = parse_number<std::size_t>(k, v);                                            \
      },                                                                                       \
          [](const RunConfig& c) { return std::to_string(c.member); }                          \
    }                                                                                          \
  }
#define NAC_REAL(path, member)                                                                 \
  {                                                                                            \
    path, {                                                                                    \
      [](RunConfig& c, const std::string& k, const std::string& v) {                           \
        c.member = parse_number<double>(k, v);                                                 \
      },                                                                                       \
          [](const RunConfig& c) { return format_double(c.member); }                           \
    }                                                                                          \
  }
#define NAC_BOOL(path, member)                                                                 \
  {                                                                                            \
    path, {                                                                                    \
      [](RunConfig& c, const std::string& k, const std::string& v) {                           \
        c.member = parse_bool(k, v);                                                           \
      },                                                                                       \
          [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }          \
    }                                                                                          \
  }
#define NAC_LIST(path, member)                                                                 \
  {                                                                                            \
    path, {                                                                                    \
      [](RunConfig& c, const std::string& k, const std::string& v) {                           \
        c.member = parse_list(k, v);                                                           \
      },                                                                                       \
          [](const RunConfig& c) { return format_list(c.member); }                             \
    }                                                                                          \
  }

// codec.family and quantizer.kind are read first because they pick the
// defaults for everything else.
const FieldTable& fields() {
  static const FieldTable table = {
      {"codec.family",
       {[](RunConfig&, const std::string&, const std::string&) {},
        [](const RunConfig& c) { return std::string(codec::family_name(c.codec.family)); }}},
      {"codec.activation",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.codec.activation = parse_enum<nn::Activation>(k, v, nn::parse_activation);
        },
        [](const RunConfig& c) { return nn::activation_name(c.codec.activation); }}},
      {"codec.sample_rate",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.codec.sample_rate = parse_number<std::uint32_t>(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.codec.sample_rate); }}},
      NAC_SIZE("codec.latent_dim", codec.latent_dim),
      NAC_LIST("codec.downsample_rates", codec.downsample_rates),
      NAC_SIZE("codec.base_channels", codec.base_channels),
      NAC_SIZE("codec.lstm_layers", codec.lstm_layers),
      NAC_SIZE("codec.n_mels", codec.n_mels),
      NAC_SIZE("codec.mel_frame_length", codec.mel_frame_length),
      NAC_SIZE("codec.hop", codec.hop),
      NAC_LIST("codec.upsample_rates", codec.upsample_rates),
      NAC_SIZE("codec.hidden_dim", codec.hidden_dim),
      NAC_SIZE("codec.residual_channels", codec.residual_channels),
      NAC_SIZE("codec.residual_blocks", codec.residual_blocks),
      NAC_SIZE("codec.generator_channels", codec.generator_channels),
      NAC_SIZE("codec.bands_per_group", codec.bands_per_group),

      {"quantizer.kind",
       {[](RunConfig&, const std::string&, const std::string&) {},
        [](const RunConfig& c) { return std::string(stream::quantizer_name(c.codec.quantizer)); }}},
      NAC_SIZE("quantizer.n_codebooks", codec.n_codebooks),
      NAC_SIZE("quantizer.codebook_size", codec.codebook_size),
      NAC_LIST("quantizer.fsq_levels", codec.fsq_levels),

      {"training.manifest",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.training_manifest = v; },
        [](const RunConfig& c) { return c.training_manifest.string(); }}},
      NAC_SIZE("training.steps", training.schedule.steps),
      NAC_REAL("training.lr", training.schedule.lr0),
      NAC_REAL("training.gamma", training.schedule.gamma),
      NAC_SIZE("training.batch_size", training.schedule.batch_size),
      NAC_REAL("training.example_seconds", training.schedule.example_seconds),
      {"training.seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.training.seed = parse_number<std::uint64_t>(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.training.seed); }}},
      NAC_SIZE("training.checkpoint_every", training.checkpoint_every),
      NAC_REAL("training.weight_time", training.weights.time_domain),
      NAC_REAL("training.weight_frequency", training.weights.frequency),
      NAC_REAL("training.weight_adversarial", training.weights.discriminative),
      NAC_REAL("training.weight_commitment", training.weights.commitment),

      {"asr.codec",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.asr_codec = v; },
        [](const RunConfig& c) { return c.asr_codec.string(); }}},
      {"asr.manifest",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.asr_manifest = v; },
        [](const RunConfig& c) { return c.asr_manifest.string(); }}},
      {"asr.aggregation",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.asr.aggregation = parse_enum<asr::Aggregation>(k, v, asr::parse_aggregation);
        },
        [](const RunConfig& c) { return asr::aggregation_name(c.asr.aggregation); }}},
      NAC_SIZE("asr.embedding_dim", asr.embedding_dim),
      // Output only: checked against the value the other keys imply.
      {"asr.feature_dim",
       {[](RunConfig&, const std::string&, const std::string&) {},
        [](const RunConfig& c) {
          return std::to_string(asr::aggregated_dim(c.asr.aggregation, c.codec.n_codebooks,
                                                    c.asr.embedding_dim));
        }}},
      NAC_BOOL("asr.codebook_init", asr.codebook_init),
      NAC_BOOL("asr.spec_augment", asr.spec_augment),
      NAC_SIZE("asr.n_time_masks", asr.spec_aug.n_time_masks),
      NAC_REAL("asr.max_time_mask_frac", asr.spec_aug.max_time_mask_frac),
      NAC_SIZE("asr.n_feature_masks", asr.spec_aug.n_feature_masks),
      NAC_REAL("asr.max_feature_mask_frac", asr.spec_aug.max_feature_mask_frac),
      NAC_REAL("asr.mask_value", asr.spec_aug.mask_value),
      NAC_REAL("asr.noise_alpha", asr.noise.alpha),
      NAC_BOOL("asr.augment_before_aggregation", asr.augment_before_aggregation),
      NAC_SIZE("asr.hidden", asr.hidden),
      {"asr.vocabulary",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.asr.vocabulary = v; },
        [](const RunConfig& c) { return c.asr.vocabulary; }}},
      NAC_REAL("asr.lr", asr.lr),
      NAC_SIZE("asr.epochs", asr.epochs),
      NAC_SIZE("asr.batch_size", asr.batch_size),
      {"asr.seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.asr.seed = parse_number<std::uint64_t>(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.asr.seed); }}},
  };
  return table;
}

#undef NAC_SIZE
#undef NAC_REAL
#undef NAC_BOOL
#undef NAC_LIST

// Flattens the tree to "section.key" -> value, rejecting anything that is
// not a known two-level key.
std::map<std::string, std::string> flatten(const pt::ptree& tree) {
  std::map<std::string, std::string> known;
  for (const auto& [path, field] : fields()) known.emplace(path, "");
  std::map<std::string, std::string> out;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty() && body.empty()) {
      throw ConfigError("'" + section + "' must be a section, not a value");
    }
    for (const auto& [key, value] : body) {
      const std::string path = section + "." + key;
      if (!known.count(path)) throw ConfigError("unknown config key '" + path + "'");
      if (!value.empty()) throw ConfigError("'" + path + "' must be a value, not a section");
      if (out.count(path)) throw ConfigError("config key '" + path + "' given twice");
      out[path] = value.data();
    }
    if (body.empty()) {
      bool any = false;
      for (const auto& [path, unused] : known) any = any || path.rfind(section + ".", 0) == 0;
      if (!any) throw ConfigError("unknown config section '" + section + "'");
    }
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  const auto wrap = [](const std::string& section, const auto& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(section + ": " + e.what());
    }
  };
  wrap("codec", [&] { codec.validate(); });
  wrap("training", [&] {
    training.schedule.validate();
    const auto& w = training.weights;
    for (const double x : {w.time_domain, w.frequency, w.discriminative, w.commitment}) {
      if (!(x >= 0.0)) throw ConfigError("training: loss weights must be non-negative");
    }
  });
  wrap("asr", [&] { asr.validate(); });
}

std::string RunConfig::resolved() const {
  pt::ptree tree;
  for (const auto& [path, field] : fields()) tree.put(path, field.write(*this));
  std::ostringstream out;
  pt::write_info(out, tree);
  return out.str();
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides,
                       const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_info(in, tree);
  } catch (const pt::info_parser_error& e) {
    throw ConfigError("config syntax error at line " + std::to_string(e.line()) + ": " + e.message());
  }
  auto values = flatten(tree);
  std::map<std::string, std::string> overridden;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const std::string path = o.substr(0, eq);
    bool known = false;
    for (const auto& f : fields()) known = known || f.first == path;
    if (eq == std::string::npos || !known) {
      throw ConfigError("override '" + o + "' does not name a known section.key=value");
    }
    values[path] = overridden[path] = o.substr(eq + 1);
  }

  const auto get = [&](const std::string& path, const std::string& fallback) {
    const auto it = values.find(path);
    return it == values.end() ? fallback : it->second;
  };
  const auto family = parse_enum<codec::Family>("codec.family", get("codec.family", "td"),
                                                codec::parse_family);
  const auto kind = parse_enum<codec::QuantizerKind>("quantizer.kind", get("quantizer.kind", "rvq"),
                                                     codec::parse_quantizer);
  RunConfig cfg;
  cfg.codec = family == codec::Family::td ? codec::td_nac_config(kind) : codec::mel_nac_config(kind);
  if (kind == codec::QuantizerKind::fsq) cfg.asr.aggregation = asr::Aggregation::stack;
  for (const auto& [path, field] : fields()) {
    const auto it = values.find(path);
    if (it != values.end()) field.read(cfg, path, it->second);
  }
  if (const auto it = values.find("asr.feature_dim"); it != values.end()) {
    const auto want = asr::aggregated_dim(cfg.asr.aggregation, cfg.codec.n_codebooks, cfg.asr.embedding_dim);
    if (parse_number<std::size_t>("asr.feature_dim", it->second) != want) {
      throw ConfigError("asr.feature_dim is " + it->second + " but aggregation and sizes give " +
                        std::to_string(want));
    }
  }
  // Paths given on the command line are relative to the working directory.
  const auto base_for = [&](const std::string& path) {
    return overridden.count(path) ? std::filesystem::current_path() : base_dir;
  };
  cfg.training_manifest = resolve_path(cfg.training_manifest.string(), base_for("training.manifest"));
  cfg.asr_manifest = resolve_path(cfg.asr_manifest.string(), base_for("asr.manifest"));
  cfg.asr_codec = resolve_path(cfg.asr_codec.string(), base_for("asr.codec"));
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides, std::filesystem::absolute(path).parent_path());
}

}  // namespace nac::config
