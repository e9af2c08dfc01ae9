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


#include "nacasr/codec.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

#include "nacasr/ops.hpp"

namespace nac::codec {

Family parse_family(const std::string& name) {
  if (name == "td") return Family::td;
  if (name == "mel") return Family::mel;
  throw std::invalid_argument("unknown codec family '" + name + "' (expected td or mel)");
}

const char* family_name(Family family) { return family == Family::td ? "td" : "mel"; }

QuantizerKind parse_quantizer(const std::string& name) {
  if (name == "rvq") return QuantizerKind::rvq;
  if (name == "fsq") return QuantizerKind::fsq;
  throw std::invalid_argument("unknown quantizer '" + name + "' (expected rvq or fsq)");
}

namespace {
std::size_t product(const std::vector<std::size_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

std::size_t CodecConfig::samples_per_frame() const {
  return product(family == Family::td ? downsample_rates : upsample_rates);
}

std::size_t CodecConfig::effective_codebook_size() const {
  return quantizer == QuantizerKind::fsq ? fsq_spec().codebook_size() : codebook_size;
}

quant::FsqSpec CodecConfig::fsq_spec() const { return {n_codebooks, fsq_levels}; }

Rational CodecConfig::frame_rate() const {
  return audio::nominal_frame_rate(sample_rate, static_cast<std::uint32_t>(samples_per_frame()));
}

void CodecConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (sample_rate != 16000) fail("codec sample rate must be 16000 Hz, got " + std::to_string(sample_rate));
  if (latent_dim == 0) fail("latent_dim must be positive");
  if (n_codebooks == 0 || n_codebooks > 255) fail("n_codebooks must be in [1, 255]");
  if (quantizer == QuantizerKind::rvq) {
    if (codebook_size < 2 || codebook_size > 65535) fail("codebook_size must be in [2, 65535]");
  } else {
    fsq_spec().validate();
    if (n_codebooks * fsq_levels.size() != latent_dim) {
      fail("FSQ needs latent_dim = n_codebooks x len(levels) = " +
           std::to_string(n_codebooks * fsq_levels.size()) + ", got " + std::to_string(latent_dim));
    }
  }
  if (family == Family::td) {
    if (downsample_rates.empty()) fail("downsample_rates is empty");
    for (std::size_t r : downsample_rates) if (r == 0) fail("downsample rate 0");
    if (base_channels == 0) fail("base_channels must be positive");
  } else {
    if (upsample_rates.empty()) fail("upsample_rates is empty");
    for (std::size_t r : upsample_rates) if (r == 0) fail("upsample rate 0");
    if (samples_per_frame() != hop) {
      fail("upsample rates multiply to " + std::to_string(samples_per_frame()) +
           " but the mel hop is " + std::to_string(hop));
    }
    if (mel_frame_length < hop || (mel_frame_length - hop) % 2 != 0) {
      fail("mel frame length must exceed the hop by an even amount");
    }
    if (hidden_dim == 0 || residual_channels == 0) fail("mel encoder widths must be positive");
    if (generator_channels >> upsample_rates.size() == 0) {
      fail("generator_channels " + std::to_string(generator_channels) + " cannot be halved " +
           std::to_string(upsample_rates.size()) + " times");
    }
    if (quantizer == QuantizerKind::fsq && n_codebooks * bands_per_group != n_mels) {
      fail("FSQ groups x bands_per_group = " + std::to_string(n_codebooks * bands_per_group) +
           " must equal n_mels = " + std::to_string(n_mels));
    }
  }
}

CodecConfig td_nac_config(QuantizerKind quantizer) {
  CodecConfig c;
  c.family = Family::td;
  c.quantizer = quantizer;
  c.latent_dim = quantizer == QuantizerKind::rvq ? 128 : 32;
  return c;
}

CodecConfig mel_nac_config(QuantizerKind quantizer) {
  CodecConfig c;
  c.family = Family::mel;
  c.quantizer = quantizer;
  c.latent_dim = quantizer == QuantizerKind::rvq ? 128 : 32;
  return c;
}

// ---------------------------------------------------------------------------

namespace {

nn::ConvOptions down_options(std::size_t stride) {
  return {stride, 1, stride - stride / 2, stride / 2};
}

nn::Var lstm_skip(const nn::Lstm& lstm, const nn::Var& x) {
  return nn::add(x, nn::transpose(lstm.forward(nn::transpose(x))));
}

}  // namespace

TdEncoder::TdEncoder(const CodecConfig& cfg, nn::Rng& rng) : act_(cfg.activation) {
  std::size_t ch = cfg.base_channels;
  conv_in_ = &register_module<nn::Conv1d>("conv_in", 1, ch, 7, rng, nn::Conv1d::same(7));
  for (std::size_t s = 0; s < cfg.downsample_rates.size(); ++s) {
    const std::size_t r = cfg.downsample_rates[s];
    const std::string prefix = "stage" + std::to_string(s);
    Stage stage;
    for (std::size_t dil : {1u, 3u}) {
      stage.units.push_back(&register_module<nn::ResidualUnit>(
          prefix + ".res" + std::to_string(dil), ch, std::max<std::size_t>(ch / 2, 1), dil, act_, rng));
    }
    stage.down = &register_module<nn::Conv1d>(prefix + ".down", ch, 2 * ch, 2 * r, rng, down_options(r));
    stages_.push_back(stage);
    ch *= 2;
  }
  lstm_ = &register_module<nn::Lstm>("lstm", ch, ch, cfg.lstm_layers, rng);
  conv_out_ = &register_module<nn::Conv1d>("conv_out", ch, cfg.latent_dim, 7, rng, nn::Conv1d::same(7));
}

nn::Var TdEncoder::forward(const nn::Var& x) const {
  nn::Var h = conv_in_->forward(x);
  for (const auto& stage : stages_) {
    for (const auto* unit : stage.units) h = unit->forward(h);
    h = stage.down->forward(nn::activate(h, act_));
  }
  h = lstm_skip(*lstm_, h);
  return conv_out_->forward(nn::activate(h, act_));
}

TdDecoder::TdDecoder(const CodecConfig& cfg, nn::Rng& rng) : act_(cfg.activation) {
  std::size_t ch = cfg.base_channels << cfg.downsample_rates.size();
  conv_in_ = &register_module<nn::Conv1d>("conv_in", cfg.latent_dim, ch, 7, rng, nn::Conv1d::same(7));
  lstm_ = &register_module<nn::Lstm>("lstm", ch, ch, cfg.lstm_layers, rng);
  for (std::size_t s = 0; s < cfg.downsample_rates.size(); ++s) {
    const std::size_t r = cfg.downsample_rates[cfg.downsample_rates.size() - 1 - s];
    const std::string prefix = "stage" + std::to_string(s);
    Stage stage;
    stage.up = &register_module<nn::ConvTranspose1d>(prefix + ".up", ch, ch / 2, 2 * r, r, r / 2,
                                                     r - r / 2, rng);
    ch /= 2;
    for (std::size_t dil : {1u, 3u}) {
      stage.units.push_back(&register_module<nn::ResidualUnit>(
          prefix + ".res" + std::to_string(dil), ch, std::max<std::size_t>(ch / 2, 1), dil, act_, rng));
    }
    stages_.push_back(stage);
  }
  conv_out_ = &register_module<nn::Conv1d>("conv_out", ch, 1, 7, rng, nn::Conv1d::same(7));
}

nn::Var TdDecoder::forward(const nn::Var& z) const {
  nn::Var h = lstm_skip(*lstm_, conv_in_->forward(z));
  for (const auto& stage : stages_) {
    h = stage.up->forward(nn::activate(h, act_));
    for (const auto* unit : stage.units) h = unit->forward(h);
  }
  return conv_out_->forward(nn::activate(h, act_));
}

MelEncoder::Branch::Branch(std::size_t in, std::size_t out, const CodecConfig& cfg, nn::Rng& rng)
    : conv_in_(register_module<nn::Conv1d>("conv_in", in, cfg.hidden_dim, 3, rng, nn::Conv1d::same(3))),
      act_(cfg.activation) {
  for (std::size_t b = 0; b < cfg.residual_blocks; ++b) {
    blocks_.push_back(&register_module<nn::ResidualUnit>("res" + std::to_string(b), cfg.hidden_dim,
                                                         cfg.residual_channels, 1, act_, rng));
  }
  conv_out_ = &register_module<nn::Conv1d>("conv_out", cfg.hidden_dim, out, 1, rng);
}

nn::Var MelEncoder::Branch::forward(const nn::Var& x) const {
  nn::Var h = conv_in_.forward(x);
  for (const auto* block : blocks_) h = block->forward(h);
  return conv_out_->forward(nn::activate(h, act_));
}

MelEncoder::MelEncoder(const CodecConfig& cfg, nn::Rng& rng) {
  if (cfg.quantizer == QuantizerKind::fsq) {
    bands_per_branch_ = cfg.bands_per_group;
    const std::size_t out = cfg.latent_dim / cfg.n_codebooks;
    for (std::size_t g = 0; g < cfg.n_codebooks; ++g) {
      branches_.push_back(&register_module<Branch>("group" + std::to_string(g), cfg.bands_per_group,
                                                   out, cfg, rng));
    }
  } else {
    bands_per_branch_ = cfg.n_mels;
    branches_.push_back(&register_module<Branch>("net", cfg.n_mels, cfg.latent_dim, cfg, rng));
  }
}

nn::Var MelEncoder::forward(const nn::Var& mel) const {
  const std::size_t expected = bands_per_branch_ * branches_.size();
  if (mel.shape().size() != 2 || mel.dim(0) != expected) {
    throw nn::ShapeError("mel encoder expects " + std::to_string(expected) + " bands, got " +
                         nn::shape_to_string(mel.shape()));
  }
  if (branches_.size() == 1) return branches_[0]->forward(mel);
  std::vector<nn::Var> parts;
  for (std::size_t g = 0; g < branches_.size(); ++g) {
    parts.push_back(branches_[g]->forward(
        nn::slice_rows(mel, g * bands_per_branch_, (g + 1) * bands_per_branch_)));
  }
  return nn::concat_rows(parts);
}

MelGenerator::MelGenerator(const CodecConfig& cfg, nn::Rng& rng) {
  std::size_t ch = cfg.generator_channels;
  conv_in_ = &register_module<nn::Conv1d>("conv_in", cfg.latent_dim, ch, 7, rng, nn::Conv1d::same(7));
  for (std::size_t s = 0; s < cfg.upsample_rates.size(); ++s) {
    const std::size_t u = cfg.upsample_rates[s];
    const std::string prefix = "stage" + std::to_string(s);
    Stage stage;
    stage.up = &register_module<nn::ConvTranspose1d>(prefix + ".up", ch, ch / 2, 2 * u, u, u / 2,
                                                     u - u / 2, rng);
    ch /= 2;
    for (std::size_t dil : {1u, 3u}) {
      stage.units.push_back(&register_module<nn::ResidualUnit>(
          prefix + ".res" + std::to_string(dil), ch, ch, dil, nn::Activation::leaky_relu, rng));
    }
    stages_.push_back(stage);
  }
  conv_out_ = &register_module<nn::Conv1d>("conv_out", ch, 1, 7, rng, nn::Conv1d::same(7));
}

nn::Var MelGenerator::forward(const nn::Var& z) const {
  nn::Var h = conv_in_->forward(z);
  for (const auto& stage : stages_) {
    h = stage.up->forward(nn::activate(h, nn::Activation::leaky_relu));
    for (const auto* unit : stage.units) h = unit->forward(h);
  }
  return nn::tanh(conv_out_->forward(nn::activate(h, nn::Activation::leaky_relu)));
}

// ---------------------------------------------------------------------------

Codec::Codec(const CodecConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  if (cfg_.family == Family::td) {
    encoder_ = &register_module<TdEncoder>("encoder", cfg_, rng);
    decoder_ = &register_module<TdDecoder>("decoder", cfg_, rng);
  } else {
    encoder_ = &register_module<MelEncoder>("encoder", cfg_, rng);
    decoder_ = &register_module<MelGenerator>("decoder", cfg_, rng);
  }
  if (cfg_.quantizer == QuantizerKind::rvq) {
    books_ = quant::CodebookSet(cfg_.n_codebooks, cfg_.codebook_size, cfg_.latent_dim);
    for (std::size_t i = 0; i < cfg_.n_codebooks; ++i) {
      const double s = 1.0 / static_cast<double>(i + 1);
      std::uniform_real_distribution<double> dist(-s, s);
      for (auto& v : books_.entries[i].data()) v = dist(rng);
    }
  }
}

std::size_t Codec::frame_count(std::size_t samples) const {
  const std::size_t f = cfg_.samples_per_frame();
  return (samples + f - 1) / f;
}

std::size_t Codec::padded_length(std::size_t samples) const {
  const std::size_t frames = frame_count(samples);
  if (cfg_.family == Family::td) return frames * cfg_.samples_per_frame();
  return frames * cfg_.hop + (cfg_.mel_frame_length - cfg_.hop);
}

std::vector<double> Codec::pad(const std::vector<double>& samples) const {
  if (samples.empty()) throw std::invalid_argument("cannot encode an empty signal");
  std::vector<double> out(padded_length(samples.size()), 0.0);
  const std::size_t left = cfg_.family == Family::td ? 0 : (cfg_.mel_frame_length - cfg_.hop) / 2;
  std::copy(samples.begin(), samples.end(), out.begin() + static_cast<std::ptrdiff_t>(left));
  return out;
}

nn::Tensor Codec::prepare(const std::vector<double>& samples) const {
  if (cfg_.family == Family::td) {
    const std::size_t f = cfg_.samples_per_frame();
    if (samples.empty() || samples.size() % f != 0) {
      throw std::invalid_argument("TD-NAC input length " + std::to_string(samples.size()) +
                                  " is not a positive multiple of " + std::to_string(f) +
                                  "; pad the signal first");
    }
    return nn::Tensor({1, samples.size()}, samples);
  }
  const auto padded = pad(samples);
  audio::MelConfig mc{cfg_.sample_rate, cfg_.mel_frame_length, cfg_.hop, cfg_.n_mels, 1e-5};
  const auto mel = audio::mel_spectrogram(padded, mc);
  nn::Tensor out({cfg_.n_mels, mel.n_frames});
  for (std::size_t t = 0; t < mel.n_frames; ++t) {
    for (std::size_t m = 0; m < cfg_.n_mels; ++m) out.at(m, t) = mel.at(t, m);
  }
  return out;
}

nn::Var Codec::encode(const nn::Var& input) const {
  return nn::transpose(encoder_->forward(input));
}

nn::Var Codec::decode(const nn::Var& latents) const {
  if (latents.shape().size() != 2 || latents.dim(1) != cfg_.latent_dim) {
    throw nn::ShapeError("decode: latents " + nn::shape_to_string(latents.shape()) + " do not have " +
                         std::to_string(cfg_.latent_dim) + " columns");
  }
  return decoder_->forward(nn::transpose(latents));
}

quant::Codes Codec::quantize(const nn::Tensor& latents) const {
  if (cfg_.quantizer == QuantizerKind::rvq) return quant::rvq_encode(latents, books_);
  const auto spec = cfg_.fsq_spec();
  return quant::fsq_quantize(quant::fsq_bound(nn::Var(latents), spec).value(), spec);
}

nn::Tensor Codec::dequantize(const quant::Codes& codes) const {
  if (cfg_.quantizer == QuantizerKind::rvq) return quant::rvq_decode(codes, books_);
  return quant::fsq_dequantize(codes, cfg_.fsq_spec());
}

QuantizedLatents Codec::quantize_train(const nn::Var& latents) const {
  QuantizedLatents out;
  if (cfg_.quantizer == QuantizerKind::rvq) {
    out.codes = quant::rvq_encode(latents.value(), books_);
    const nn::Tensor zhat = quant::rvq_decode(out.codes, books_);
    out.latents = nn::straight_through(zhat, latents);
    out.commitment = quant::commitment_loss(latents, zhat);
  } else {
    const auto spec = cfg_.fsq_spec();
    nn::Var bounded = quant::fsq_bound(latents, spec);
    out.codes = quant::fsq_quantize(bounded.value(), spec);
    out.latents = nn::straight_through(quant::fsq_dequantize(out.codes, spec), bounded);
  }
  return out;
}

quant::Codes Codec::encode_audio(const audio::AudioSignal& signal) const {
  signal.validate();
  if (signal.sample_rate_hz != cfg_.sample_rate) {
    throw std::invalid_argument("signal is " + std::to_string(signal.sample_rate_hz) +
                                " Hz, codec expects " + std::to_string(cfg_.sample_rate) + " Hz");
  }
  const auto input = cfg_.family == Family::td ? prepare(pad(signal.samples)) : prepare(signal.samples);
  auto codes = quantize(encode(nn::Var(input)).value());
  quant::check_code_range(codes, cfg_.effective_codebook_size());
  return codes;
}

audio::AudioSignal Codec::decode_audio(const quant::Codes& codes, std::size_t original_length) const {
  if (original_length > codes.frames * cfg_.samples_per_frame()) {
    throw std::invalid_argument("stream of " + std::to_string(codes.frames) +
                                " frames cannot hold " + std::to_string(original_length) + " samples");
  }
  const auto wave = decode(nn::Var(dequantize(codes))).value();
  audio::AudioSignal out;
  out.sample_rate_hz = cfg_.sample_rate;
  out.samples.assign(wave.data().begin(), wave.data().begin() + static_cast<std::ptrdiff_t>(original_length));
  return out;
}

audio::AudioSignal Codec::roundtrip(const audio::AudioSignal& signal) const {
  return decode_audio(encode_audio(signal), signal.samples.size());
}

stream::CodeStream Codec::make_stream(const audio::AudioSignal& signal) const {
  stream::CodeStream s;
  s.codes = encode_audio(signal);
  s.header.quantizer = cfg_.quantizer;
  s.header.sample_rate = cfg_.sample_rate;
  s.header.samples_per_frame = static_cast<std::uint32_t>(cfg_.samples_per_frame());
  s.header.n_codebooks = static_cast<std::uint8_t>(cfg_.n_codebooks);
  s.header.codebook_size = static_cast<std::uint16_t>(cfg_.effective_codebook_size());
  s.header.original_sample_count = signal.samples.size();
  s.header.frame_count = s.codes.frames;
  return s;
}

void Codec::check_stream(const stream::CodeStreamHeader& h) const {
  auto mismatch = [](const std::string& field, const std::string& got, const std::string& want) {
    throw std::invalid_argument("stream " + field + " is " + got + " but the model expects " + want);
  };
  if (h.quantizer != cfg_.quantizer) {
    mismatch("quantizer", stream::quantizer_name(h.quantizer), stream::quantizer_name(cfg_.quantizer));
  }
  if (h.sample_rate != cfg_.sample_rate) {
    mismatch("sample rate", std::to_string(h.sample_rate), std::to_string(cfg_.sample_rate));
  }
  if (h.samples_per_frame != cfg_.samples_per_frame()) {
    mismatch("samples per frame", std::to_string(h.samples_per_frame),
             std::to_string(cfg_.samples_per_frame()));
  }
  if (h.n_codebooks != cfg_.n_codebooks) {
    mismatch("codebook count", std::to_string(h.n_codebooks), std::to_string(cfg_.n_codebooks));
  }
  if (h.codebook_size != cfg_.effective_codebook_size()) {
    mismatch("codebook size", std::to_string(h.codebook_size),
             std::to_string(cfg_.effective_codebook_size()));
  }
}

std::vector<nn::NamedTensor> Codec::state() {
  auto records = nn::module_records(*this);
  if (cfg_.quantizer == QuantizerKind::rvq) {
    for (std::size_t i = 0; i < books_.n_codebooks; ++i) {
      records.push_back({"rvq.book" + std::to_string(i), books_.entries[i]});
      records.push_back({"rvq.usage" + std::to_string(i),
                         nn::Tensor({books_.codebook_size}, books_.usage_ema[i])});
    }
  }
  return records;
}

void Codec::load_state(const std::vector<nn::NamedTensor>& records) {
  nn::load_module(*this, records);
  if (cfg_.quantizer != QuantizerKind::rvq) return;
  for (std::size_t i = 0; i < books_.n_codebooks; ++i) {
    const nn::Tensor& book = nn::find_record(records, "rvq.book" + std::to_string(i));
    const nn::Tensor& usage = nn::find_record(records, "rvq.usage" + std::to_string(i));
    if (book.shape() != books_.entries[i].shape() || usage.numel() != books_.codebook_size) {
      throw nn::CheckpointError("codebook " + std::to_string(i) + " has shape " +
                                nn::shape_to_string(book.shape()) + ", model expects " +
                                nn::shape_to_string(books_.entries[i].shape()));
    }
    books_.entries[i] = book;
    books_.usage_ema[i] = usage.storage();
  }
  books_.validate();
}

}  // namespace nac::codec
