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

// Parameter checkpoints.
//
//   "NACP" | version u8 | record*
//   record := name_len u16 | name utf-8 | rank u8 | extents u32[rank] | values f32[]
//
// All integers and floats little-endian. Records run to end of file.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "nacasr/layers.hpp"
#include "nacasr/tensor.hpp"

namespace nac::nn {

inline constexpr std::uint8_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& records);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& records);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

/// Snapshot of every parameter of `module`, names prefixed with `prefix`.
std::vector<NamedTensor> module_records(Module& module, const std::string& prefix = "");

/// Copies matching records into `module`. Every parameter must be present
/// with an identical shape; values are rounded through f32 on disk.
void load_module(Module& module, const std::vector<NamedTensor>& records,
                 const std::string& prefix = "");

/// The record named `name`; throws CheckpointError when absent.
const Tensor& find_record(const std::vector<NamedTensor>& records, const std::string& name);

}  // namespace nac::nn
