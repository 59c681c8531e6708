// Copyright 2026 The hamtl Authors.
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

// Binary checkpoint: an 8-byte little-endian length prefix, a UTF-8 JSON
// metadata document of that length, then every parameter tensor as
// little-endian float64 values in declared parameter order.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hamtl/labels.hpp"
#include "hamtl/models.hpp"

namespace hamtl {

struct CheckpointMeta {
  models::ModelSpec spec;
  std::uint64_t vocab_hash = 0;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  nlohmann::ordered_json dev_metrics = nlohmann::ordered_json::object();
  std::map<Task, std::vector<std::string>> classes;  // index -> label name
};

struct LoadedCheckpoint {
  CheckpointMeta meta;
  models::Model model;
};

std::string encode_checkpoint(const models::Model& model, const CheckpointMeta& meta);
LoadedCheckpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const models::Model& model,
                     const CheckpointMeta& meta);

// Throws VocabMismatch when expected_vocab_hash is given and differs from the
// stored hash, ParseError on a malformed file and IoError when unreadable.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 std::optional<std::uint64_t> expected_vocab_hash = {});

}  // namespace hamtl
