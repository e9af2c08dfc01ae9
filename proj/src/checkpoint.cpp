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

#include "nacasr/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <limits>
#include <unordered_set>

#include "nacasr/byte_io.hpp"

namespace nac::io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace nac::io

namespace nac::nn {

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& records) {
  io::ByteWriter w;
  w.raw("NACP");
  w.u8(kCheckpointVersion);
  std::unordered_set<std::string> names;
  for (const auto& [name, value] : records) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw CheckpointError("parameter name too long: " + name.substr(0, 64));
    }
    if (!names.insert(name).second) throw CheckpointError("duplicate record name: " + name);
    if (value.rank() > std::numeric_limits<std::uint8_t>::max()) {
      throw CheckpointError("rank too large for " + name);
    }
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name);
    w.u8(static_cast<std::uint8_t>(value.rank()));
    for (std::size_t extent : value.shape()) {
      if (extent > std::numeric_limits<std::uint32_t>::max()) {
        throw CheckpointError("extent too large for " + name);
      }
      w.u32(static_cast<std::uint32_t>(extent));
    }
    for (double v : value.data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  std::vector<NamedTensor> out;
  try {
    if (r.raw(4) != "NACP") throw CheckpointError("not a checkpoint: bad magic");
    const std::uint8_t version = r.u8();
    if (version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    while (!r.at_end()) {
      NamedTensor rec;
      rec.name = r.raw(r.u16());
      const std::uint8_t rank = r.u8();
      Shape shape(rank);
      for (auto& e : shape) e = r.u32();
      const std::size_t n = shape_numel(shape);
      if (n > r.remaining() / 4) {
        throw CheckpointError("record " + rec.name + " truncated");
      }
      std::vector<double> values(n);
      for (auto& v : values) v = static_cast<double>(r.f32());
      rec.value = Tensor(std::move(shape), std::move(values));
      out.push_back(std::move(rec));
    }
  } catch (const io::TruncatedInput& e) {
    throw CheckpointError(std::string("truncated checkpoint: ") + e.what());
  }
  return out;
}

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& records) {
  io::write_file(path, encode_checkpoint(records));
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = io::read_file(path);
  } catch (const std::runtime_error& e) {
    throw CheckpointError(e.what());
  }
  return decode_checkpoint(bytes);
}

std::vector<NamedTensor> module_records(Module& module, const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (auto& [name, p] : module.named_parameters()) out.push_back({prefix + name, p->value()});
  return out;
}

const Tensor& find_record(const std::vector<NamedTensor>& records, const std::string& name) {
  for (const auto& r : records) {
    if (r.name == name) return r.value;
  }
  throw CheckpointError("checkpoint has no record named " + name);
}

void load_module(Module& module, const std::vector<NamedTensor>& records,
                 const std::string& prefix) {
  for (auto& [name, p] : module.named_parameters()) {
    const Tensor& src = find_record(records, prefix + name);
    if (src.shape() != p->value().shape()) {
      throw CheckpointError("shape mismatch for " + prefix + name + ": checkpoint " +
                            shape_to_string(src.shape()) + ", model " +
                            shape_to_string(p->value().shape()));
    }
    p->value() = src;
  }
}

}  // namespace nac::nn
