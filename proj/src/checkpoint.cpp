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

#include "hamtl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hamtl/error.hpp"
#include "hamtl/hash.hpp"

namespace hamtl {
namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::kParseError, "checkpoint: " + what);
}

}  // namespace

std::string encode_checkpoint(const models::Model& model, const CheckpointMeta& meta) {
  nlohmann::ordered_json j;
  j["format"] = "hamtl-checkpoint-1";
  j["spec"] = meta.spec.to_json();
  j["vocab_hash"] = hex64(meta.vocab_hash);
  j["seed"] = meta.seed;
  j["epoch"] = meta.epoch;
  j["dev_metrics"] = meta.dev_metrics;
  nlohmann::ordered_json classes = nlohmann::ordered_json::object();
  for (const auto& [task, names] : meta.classes) classes[std::string(task_name(task))] = names;
  j["classes"] = classes;
  auto params = nlohmann::ordered_json::array();
  for (const auto& p : model.parameters()) {
    params.push_back({{"name", p.name}, {"rows", p.tensor.rows()}, {"cols", p.tensor.cols()}});
  }
  j["parameters"] = params;

  const std::string doc = j.dump();
  std::string out;
  out.reserve(8 + doc.size() + model.parameter_count() * 8);
  put_u64(out, doc.size());
  out += doc;
  for (const auto& p : model.parameters()) {
    for (double v : p.tensor.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

LoadedCheckpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8) malformed("truncated header");
  const std::uint64_t len = get_u64(bytes, 0);
  if (len > bytes.size() - 8) malformed("metadata length exceeds file size");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.substr(8, len));
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  }

  CheckpointMeta meta;
  try {
    meta.spec = models::ModelSpec::from_json(j.at("spec"));
    meta.vocab_hash = std::stoull(j.at("vocab_hash").get<std::string>(), nullptr, 16);
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.epoch = j.at("epoch").get<std::size_t>();
    meta.dev_metrics = nlohmann::ordered_json::parse(j.at("dev_metrics").dump());
    for (const auto& [name, list] : j.at("classes").items()) {
      const auto task = parse_task(name);
      if (!task) malformed("unknown task " + name);
      meta.classes[*task] = list.get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  } catch (const std::logic_error& e) {
    malformed(e.what());
  }

  models::Model model(meta.spec, meta.seed);
  const auto& declared = j.at("parameters");
  const auto& params = model.parameters();
  if (declared.size() != params.size()) malformed("parameter count differs from spec");
  std::size_t pos = 8 + len;
  std::vector<std::vector<double>> values;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& d = declared[k];
    if (d.at("name").get<std::string>() != params[k].name ||
        d.at("rows").get<std::size_t>() != params[k].tensor.rows() ||
        d.at("cols").get<std::size_t>() != params[k].tensor.cols()) {
      malformed("parameter " + params[k].name + " does not match spec");
    }
    const std::size_t n = params[k].tensor.size();
    if (bytes.size() - pos < n * 8) malformed("truncated tensor data");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i, pos += 8) v[i] = std::bit_cast<double>(get_u64(bytes, pos));
    values.push_back(std::move(v));
  }
  if (pos != bytes.size()) malformed("trailing bytes");
  model.restore(values);
  return {std::move(meta), std::move(model)};
}

void save_checkpoint(const std::filesystem::path& path, const models::Model& model,
                     const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  const std::string bytes = encode_checkpoint(model, meta);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "short write to " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 std::optional<std::uint64_t> expected_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  LoadedCheckpoint loaded = decode_checkpoint(buf.str());
  if (expected_vocab_hash && *expected_vocab_hash != loaded.meta.vocab_hash) {
    throw Error(ErrorCode::kVocabMismatch, "checkpoint vocabulary " +
                                               hex64(loaded.meta.vocab_hash) + " vs " +
                                               hex64(*expected_vocab_hash));
  }
  return loaded;
}

}  // namespace hamtl
