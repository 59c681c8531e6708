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

#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "hamtl/checkpoint.hpp"
#include "support.hpp"

using namespace hamtl;
using namespace hamtl::models;
using hamtl::testing::error_code_of;

namespace {

ModelSpec small_spec() {
  ModelSpec s;
  s.variant = Variant::kHamtl;
  s.vocab_size = 9;
  s.embed_dim = 4;
  s.hidden_size = 2;
  s.heads = 2;
  s.class_counts = {{Task::kCity, 3}, {Task::kState, 2}, {Task::kCountry, 2}};
  return s;
}

CheckpointMeta meta_for(const Model& m) {
  CheckpointMeta meta;
  meta.spec = m.spec();
  meta.vocab_hash = 0xfeedfacecafebeefULL;
  meta.seed = 17;
  meta.epoch = 4;
  meta.dev_metrics = {{"city", 51.5}};
  meta.classes = {{Task::kCity, {"a", "b", "c"}}, {Task::kState, {"s", "t"}}, {Task::kCountry, {"x", "y"}}};
  return meta;
}

}  // namespace

TEST_CASE("checkpoint round trip is bitwise") {
  Model m(small_spec(), 3);
  auto params = m.snapshot();
  params[0][0] = -0.0;
  params[1][1] = 1e-310;
  m.restore(params);
  const auto path = std::filesystem::temp_directory_path() / "hamtl_ckpt_test.bin";
  save_checkpoint(path, m, meta_for(m));
  const auto loaded = load_checkpoint(path, 0xfeedfacecafebeefULL);
  const auto back = loaded.model.snapshot();
  REQUIRE(back.size() == params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    CHECK(std::memcmp(back[k].data(), params[k].data(), params[k].size() * sizeof(double)) == 0);
  }
  CHECK(loaded.meta.seed == 17);
  CHECK(loaded.meta.epoch == 4);
  CHECK(loaded.meta.classes.at(Task::kCity) == std::vector<std::string>{"a", "b", "c"});
  CHECK(loaded.meta.dev_metrics["city"] == 51.5);
  CHECK(loaded.meta.spec.to_json() == m.spec().to_json());

  CHECK(error_code_of([&] { load_checkpoint(path, 1); }) == ErrorCode::kVocabMismatch);
  std::filesystem::remove(path);
  CHECK(error_code_of([&] { load_checkpoint(path); }) == ErrorCode::kIoError);
}

TEST_CASE("checkpoint byte layout") {
  const Model m(small_spec(), 3);
  const std::string bytes = encode_checkpoint(m, meta_for(m));
  std::uint64_t len = 0;
  for (int i = 7; i >= 0; --i) len = (len << 8) | static_cast<unsigned char>(bytes[i]);
  CHECK(bytes[8] == '{');
  CHECK(bytes[8 + len - 1] == '}');
  CHECK(bytes.size() == 8 + len + 8 * m.parameter_count());
  // First embedding value, little-endian.
  const double first = m.parameters()[0].tensor.values()[0];
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(bytes[8 + len + i]);
  CHECK(std::bit_cast<double>(bits) == first);
  // Encoding is deterministic.
  CHECK(encode_checkpoint(m, meta_for(m)) == bytes);
}

TEST_CASE("malformed checkpoints are rejected") {
  const Model m(small_spec(), 3);
  const std::string bytes = encode_checkpoint(m, meta_for(m));
  CHECK(error_code_of([&] { decode_checkpoint(bytes.substr(0, 5)); }) == ErrorCode::kParseError);
  CHECK(error_code_of([&] { decode_checkpoint(bytes.substr(0, bytes.size() - 1)); }) ==
        ErrorCode::kParseError);
  CHECK(error_code_of([&] { decode_checkpoint(bytes + "x"); }) == ErrorCode::kParseError);
  std::string broken = bytes;
  broken[9] = '!';
  CHECK(error_code_of([&] { decode_checkpoint(broken); }) == ErrorCode::kParseError);
}
