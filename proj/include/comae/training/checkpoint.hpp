// Copyright 2026 The comae-cpp Authors.
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

#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "comae/nn/tape.hpp"
#include "comae/training/training.hpp"

namespace comae::training {

// Binary container shared by model and classifier checkpoints:
//
//   "COMAECKP" | u32 version | u64 header bytes | header (UTF-8 JSON)
//   | u64 array count | per array: u32 name bytes, name, u64 rows,
//   u64 cols, rows * cols little-endian doubles | u64 FNV-1a of all
//   preceding bytes
//
// The header always carries the taxonomy table and its hash; loading a
// file written under a different taxonomy is refused.
struct Container {
  nlohmann::ordered_json header;
  std::map<std::string, nn::Tensor> arrays;
};

void write_container(const std::string& path, nlohmann::ordered_json header,
                     std::span<const nn::Parameter* const> arrays);
// Validates size, checksum, version and taxonomy before returning; nothing
// is returned on failure.
Container read_container(const std::string& path);

// Copies every named array into the matching parameter; shapes must agree
// and no array may be missing or left over.
void restore_parameters(const Container& container,
                        std::span<nn::Parameter* const> params);

nlohmann::ordered_json config_to_json(const TrainingConfig& config);
TrainingConfig config_from_json(const nlohmann::json& j);

void save_checkpoint(const std::string& path, const ModelCheckpoint& checkpoint);
ModelCheckpoint load_checkpoint(const std::string& path);

}  // namespace comae::training
