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

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hamtl/autograd.hpp"
#include "hamtl/corpus.hpp"
#include "hamtl/labels.hpp"
#include "hamtl/layers.hpp"

namespace hamtl::models {

using ag::Tensor;

enum class Variant {
  kSingleTask,      // 3 BiGRU layers, attention on the third
  kGru500Baseline,  // 1 unidirectional GRU layer, last state
  kMtlCommonAttn,   // 3 shared BiGRU layers, one shared attention
  kMtlSpecAttn,     // 2 shared BiGRU layers + per-task BiGRU/attention layer
  kHamtl,           // 4 stacked BiGRU layers, tasks tapped at layers 2, 3, 4
};

enum class HamtlOrder { kCityFirst, kCountryFirst };

std::string_view variant_name(Variant variant);
std::optional<Variant> parse_variant(std::string_view name);
std::string_view order_name(HamtlOrder order);
std::optional<HamtlOrder> parse_order(std::string_view name);

// 0.7 for HA-MTL, 0.5 otherwise.
double default_dropout(Variant variant);

struct ModelSpec {
  Variant variant = Variant::kSingleTask;
  Task task = Task::kCountry;  // SingleTask and Gru500Baseline only
  HamtlOrder order = HamtlOrder::kCityFirst;
  std::size_t vocab_size = 0;
  std::map<Task, std::size_t> class_counts;
  double dropout_rate = 0.5;
  std::size_t heads = 4;
  std::size_t embed_dim = 300;
  std::size_t hidden_size = 500;  // per direction
  std::size_t max_len = 50;

  // Tasks this variant supervises, in head order.
  std::vector<Task> tasks() const;
  bool is_multi_task() const;
  // Throws InvalidSpec.
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

// For HA-MTL: the task supervised at each of BiGRU layers 2 to 4.
std::array<Task, 3> hamtl_layer_tasks(HamtlOrder order);

// One encoded tweet. targets[task] == -1 when the label is missing.
struct Example {
  std::string tweet_id;
  std::vector<int> token_ids;
  std::size_t length = 0;
  std::array<int, 3> targets = {-1, -1, -1};
  corpus::LabelSource source = corpus::LabelSource::kGold;

  int target(Task task) const { return targets[static_cast<std::size_t>(task)]; }
};

struct Batch {
  std::vector<int> token_ids;  // batch * steps, row-major
  kernels::SequenceLayout layout;
  std::map<Task, std::vector<int>> targets;
};

// Sequences are padded/truncated to `steps`. Zero-length sequences are given
// length 1 (a single PAD position) so masked attention stays defined.
// Targets are filled for a task only when every example has that label.
Batch make_batch(std::span<const Example* const> examples, std::size_t steps);

struct ModelOutput {
  std::map<Task, Tensor> probs;   // batch x n_classes per task
  std::map<Task, Tensor> losses;  // mean cross-entropy, when targets given
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

class Model {
 public:
  Model(ModelSpec spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }

  // Dropout is active only when training; its masks derive from
  // dropout_seed. Throws VocabMismatch for ids outside the vocabulary.
  ModelOutput forward(const Batch& batch, bool training,
                      std::uint64_t dropout_seed = 0) const;

  // mtl_loss for multi-task variants, the single task loss otherwise.
  Tensor objective(const ModelOutput& output) const;

  const std::vector<NamedParameter>& parameters() const { return params_; }
  std::vector<Tensor> parameter_tensors() const;
  std::size_t parameter_count() const;

  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);
  void zero_grad();

 private:
  Tensor& add_param(const std::string& name, Tensor t);
  void add_bigru(const std::string& name, const layers::BiGRUParams& p);
  void add_attention(const std::string& name, const layers::MultiHeadAttentionParams& p);
  void add_dense(const std::string& name, const layers::DenseLayer& d);

  Tensor head_probs(const Tensor& pooled, Task task) const;

  ModelSpec spec_;
  layers::EmbeddingTable embedding_;
  std::vector<layers::BiGRUParams> trunk_;
  std::map<Task, layers::BiGRUParams> task_bigru_;
  std::vector<layers::MultiHeadAttentionParams> attention_;
  std::map<Task, layers::MultiHeadAttentionParams> task_attention_;
  layers::GRUCellParams gru_;
  std::map<Task, layers::DenseLayer> heads_;
  std::vector<NamedParameter> params_;
};

Model build_model(const ModelSpec& spec, std::uint64_t seed);

// (L_city + L_state + L_country) / 3. Throws MissingTaskLoss.
Tensor mtl_loss(const std::map<Task, Tensor>& task_losses);

}  // namespace hamtl::models
