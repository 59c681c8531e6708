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

#include "hamtl/models.hpp"

#include <random>

#include "hamtl/error.hpp"
#include "hamtl/hash.hpp"

namespace hamtl::models {

std::string_view variant_name(Variant variant) {
  switch (variant) {
    case Variant::kSingleTask: return "single";
    case Variant::kGru500Baseline: return "gru500";
    case Variant::kMtlCommonAttn: return "mtl-common";
    case Variant::kMtlSpecAttn: return "mtl-spec";
    case Variant::kHamtl: return "hamtl";
  }
  return "single";
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (auto v : {Variant::kSingleTask, Variant::kGru500Baseline, Variant::kMtlCommonAttn,
                 Variant::kMtlSpecAttn, Variant::kHamtl}) {
    if (variant_name(v) == name) return v;
  }
  return std::nullopt;
}

std::string_view order_name(HamtlOrder order) {
  return order == HamtlOrder::kCityFirst ? "city_first" : "country_first";
}

std::optional<HamtlOrder> parse_order(std::string_view name) {
  if (name == "city_first") return HamtlOrder::kCityFirst;
  if (name == "country_first") return HamtlOrder::kCountryFirst;
  return std::nullopt;
}

double default_dropout(Variant variant) {
  return variant == Variant::kHamtl ? 0.7 : 0.5;
}

std::array<Task, 3> hamtl_layer_tasks(HamtlOrder order) {
  if (order == HamtlOrder::kCityFirst) return {Task::kCity, Task::kState, Task::kCountry};
  return {Task::kCountry, Task::kState, Task::kCity};
}

std::vector<Task> ModelSpec::tasks() const {
  if (variant == Variant::kSingleTask || variant == Variant::kGru500Baseline) return {task};
  return {kAllTasks.begin(), kAllTasks.end()};
}

bool ModelSpec::is_multi_task() const { return tasks().size() > 1; }

void ModelSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidSpec, msg); };
  if (vocab_size < 4) fail("vocab_size must cover the 4 reserved tokens");
  if (embed_dim == 0 || hidden_size == 0 || max_len == 0) fail("dimensions must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0,1)");
  if (variant != Variant::kGru500Baseline) {
    if (heads == 0 || (2 * hidden_size) % heads != 0) {
      fail("2 * hidden_size must be divisible by heads");
    }
  }
  const auto t = tasks();
  if (class_counts.size() != t.size()) fail("class_counts must list exactly the supervised tasks");
  for (Task task_k : t) {
    const auto it = class_counts.find(task_k);
    if (it == class_counts.end()) fail("missing class count for " + std::string(task_name(task_k)));
    if (it->second < 1) fail("class count must be >= 1");
  }
}

nlohmann::ordered_json ModelSpec::to_json() const {
  nlohmann::ordered_json j;
  j["variant"] = variant_name(variant);
  if (!is_multi_task()) j["task"] = task_name(task);
  if (variant == Variant::kHamtl) j["order"] = order_name(order);
  j["vocab_size"] = vocab_size;
  nlohmann::ordered_json counts;
  for (auto [k, n] : class_counts) counts[std::string(task_name(k))] = n;
  j["class_counts"] = counts;
  j["dropout_rate"] = dropout_rate;
  j["heads"] = heads;
  j["embed_dim"] = embed_dim;
  j["hidden_size"] = hidden_size;
  j["max_len"] = max_len;
  return j;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  try {
    ModelSpec s;
    auto v = parse_variant(j.at("variant").get<std::string>());
    if (!v) throw Error(ErrorCode::kInvalidSpec, "unknown variant");
    s.variant = *v;
    if (j.contains("task")) {
      auto t = parse_task(j.at("task").get<std::string>());
      if (!t) throw Error(ErrorCode::kInvalidSpec, "unknown task");
      s.task = *t;
    }
    if (j.contains("order")) {
      auto o = parse_order(j.at("order").get<std::string>());
      if (!o) throw Error(ErrorCode::kInvalidSpec, "unknown order");
      s.order = *o;
    }
    s.vocab_size = j.at("vocab_size").get<std::size_t>();
    for (const auto& [name, n] : j.at("class_counts").items()) {
      auto t = parse_task(name);
      if (!t) throw Error(ErrorCode::kInvalidSpec, "unknown task " + name);
      s.class_counts[*t] = n.get<std::size_t>();
    }
    s.dropout_rate = j.at("dropout_rate").get<double>();
    s.heads = j.at("heads").get<std::size_t>();
    s.embed_dim = j.at("embed_dim").get<std::size_t>();
    s.hidden_size = j.at("hidden_size").get<std::size_t>();
    s.max_len = j.at("max_len").get<std::size_t>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, e.what());
  }
}

Batch make_batch(std::span<const Example* const> examples, std::size_t steps) {
  Batch batch;
  batch.layout.batch = examples.size();
  batch.layout.steps = steps;
  batch.token_ids.assign(examples.size() * steps, corpus::Vocabulary::kPad);
  for (std::size_t b = 0; b < examples.size(); ++b) {
    const Example& ex = *examples[b];
    const std::size_t len = std::min({ex.length, steps, ex.token_ids.size()});
    std::copy_n(ex.token_ids.begin(), len, batch.token_ids.begin() + static_cast<long>(b * steps));
    batch.layout.lengths.push_back(std::max<std::size_t>(len, 1));
  }
  for (Task task : kAllTasks) {
    std::vector<int> t;
    for (const Example* ex : examples) {
      if (ex->target(task) < 0) break;
      t.push_back(ex->target(task));
    }
    if (!examples.empty() && t.size() == examples.size()) batch.targets[task] = std::move(t);
  }
  return batch;
}

// --- Model ----------------------------------------------------------------

Tensor& Model::add_param(const std::string& name, Tensor t) {
  params_.push_back({name, std::move(t)});
  return params_.back().tensor;
}

void Model::add_bigru(const std::string& name, const layers::BiGRUParams& p) {
  for (const auto& [dir, g] : {std::pair{"fwd", &p.forward}, std::pair{"bwd", &p.backward}}) {
    add_param(name + "." + dir + ".w", g->w);
    add_param(name + "." + dir + ".u", g->u);
    add_param(name + "." + dir + ".b", g->b);
  }
}

void Model::add_attention(const std::string& name, const layers::MultiHeadAttentionParams& p) {
  add_param(name + ".wq", p.wq);
  add_param(name + ".wk", p.wk);
  add_param(name + ".wv", p.wv);
  add_param(name + ".wo", p.wo);
}

void Model::add_dense(const std::string& name, const layers::DenseLayer& d) {
  add_param(name + ".w", d.w);
  add_param(name + ".b", d.b);
}

Model::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t E = spec_.embed_dim, H = spec_.hidden_size, D = 2 * H;

  embedding_ = layers::make_embedding(spec_.vocab_size, E, rng);
  add_param("embedding", embedding_.weight);

  auto push_trunk = [&](std::size_t count) {
    for (std::size_t l = 0; l < count; ++l) {
      trunk_.push_back(layers::make_bigru_params(l == 0 ? E : D, H, rng));
      add_bigru("bigru" + std::to_string(l + 1), trunk_.back());
    }
  };
  auto make_head = [&](Task task, std::size_t in) {
    heads_[task] = layers::make_dense(in, spec_.class_counts.at(task), rng);
    add_dense("head." + std::string(task_name(task)), heads_[task]);
  };

  switch (spec_.variant) {
    case Variant::kSingleTask:
    case Variant::kMtlCommonAttn:
      push_trunk(3);
      attention_.push_back(layers::make_attention_params(D, spec_.heads, rng));
      add_attention("attn3", attention_.back());
      for (Task t : spec_.tasks()) make_head(t, D);
      break;
    case Variant::kGru500Baseline:
      gru_ = layers::make_gru_params(E, H, rng);
      add_param("gru.w", gru_.w);
      add_param("gru.u", gru_.u);
      add_param("gru.b", gru_.b);
      make_head(spec_.task, H);
      break;
    case Variant::kMtlSpecAttn:
      push_trunk(2);
      for (Task t : spec_.tasks()) {
        const std::string name(task_name(t));
        task_bigru_[t] = layers::make_bigru_params(D, H, rng);
        add_bigru("bigru3." + name, task_bigru_[t]);
        task_attention_[t] = layers::make_attention_params(D, spec_.heads, rng);
        add_attention("attn3." + name, task_attention_[t]);
        make_head(t, D);
      }
      break;
    case Variant::kHamtl: {
      push_trunk(4);
      const auto layer_tasks = hamtl_layer_tasks(spec_.order);
      for (std::size_t k = 0; k < 3; ++k) {
        attention_.push_back(layers::make_attention_params(D, spec_.heads, rng));
        add_attention("attn" + std::to_string(k + 2), attention_.back());
        make_head(layer_tasks[k], D);
      }
      break;
    }
  }
}

Tensor Model::head_probs(const Tensor& pooled, Task task) const {
  return layers::classify_head(pooled, heads_.at(task));
}

ModelOutput Model::forward(const Batch& batch, bool training,
                           std::uint64_t dropout_seed) const {
  for (int id : batch.token_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= spec_.vocab_size) {
      throw Error(ErrorCode::kVocabMismatch,
                  "token id " + std::to_string(id) + " outside model vocabulary of " +
                      std::to_string(spec_.vocab_size));
    }
  }
  const auto& layout = batch.layout;
  const double rate = spec_.dropout_rate;
  std::uint64_t dropout_site = 0;
  auto drop = [&](const Tensor& t) {
    return ag::apply_dropout(t, rate, training, combine_seed(dropout_seed, ++dropout_site));
  };

  ModelOutput out;
  const Tensor emb = layers::embed_lookup(batch.token_ids, embedding_);

  switch (spec_.variant) {
    case Variant::kSingleTask:
    case Variant::kMtlCommonAttn: {
      Tensor h = emb;
      for (const auto& layer : trunk_) h = drop(layers::bigru_forward(h, layout, layer));
      const Tensor pooled =
          layers::attention_pool(layers::multi_head_attention(h, layout, attention_[0]), layout);
      for (Task t : spec_.tasks()) out.probs[t] = head_probs(pooled, t);
      break;
    }
    case Variant::kGru500Baseline: {
      const Tensor h = layers::gru_sequence(emb, layout, gru_, false);
      std::vector<int> last(layout.batch);
      for (std::size_t b = 0; b < layout.batch; ++b) {
        last[b] = static_cast<int>(b * layout.steps + layout.lengths[b] - 1);
      }
      out.probs[spec_.task] = head_probs(drop(ag::gather_rows(h, last)), spec_.task);
      break;
    }
    case Variant::kMtlSpecAttn: {
      Tensor h = emb;
      for (const auto& layer : trunk_) h = drop(layers::bigru_forward(h, layout, layer));
      for (Task t : spec_.tasks()) {
        const Tensor ht = drop(layers::bigru_forward(h, layout, task_bigru_.at(t)));
        const Tensor pooled = layers::attention_pool(
            layers::multi_head_attention(ht, layout, task_attention_.at(t)), layout);
        out.probs[t] = head_probs(pooled, t);
      }
      break;
    }
    case Variant::kHamtl: {
      const auto layer_tasks = hamtl_layer_tasks(spec_.order);
      Tensor h = emb;
      for (std::size_t l = 0; l < trunk_.size(); ++l) {
        h = drop(layers::bigru_forward(h, layout, trunk_[l]));
        if (l == 0) continue;
        const Tensor pooled = layers::attention_pool(
            layers::multi_head_attention(h, layout, attention_[l - 1]), layout);
        out.probs[layer_tasks[l - 1]] = head_probs(pooled, layer_tasks[l - 1]);
      }
      break;
    }
  }

  for (auto& [task, probs] : out.probs) {
    const auto it = batch.targets.find(task);
    if (it != batch.targets.end()) out.losses[task] = ag::cross_entropy(probs, it->second);
  }
  return out;
}

Tensor Model::objective(const ModelOutput& output) const {
  if (spec_.is_multi_task()) return mtl_loss(output.losses);
  const auto it = output.losses.find(spec_.task);
  if (it == output.losses.end()) {
    throw Error(ErrorCode::kMissingTaskLoss, "no loss for " + std::string(task_name(spec_.task)));
  }
  return it->second;
}

std::vector<Tensor> Model::parameter_tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

std::vector<std::vector<double>> Model::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

void Model::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "restore: " + std::to_string(values.size()) +
                                               " tensors for " +
                                               std::to_string(params_.size()) + " parameters");
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    auto dst = params_[k].tensor.mutable_values();
    if (values[k].size() != dst.size()) {
      throw Error(ErrorCode::kShapeMismatch, "restore: size mismatch for " + params_[k].name);
    }
    std::copy(values[k].begin(), values[k].end(), dst.begin());
  }
}

void Model::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Model build_model(const ModelSpec& spec, std::uint64_t seed) { return Model(spec, seed); }

Tensor mtl_loss(const std::map<Task, Tensor>& task_losses) {
  std::vector<Tensor> parts;
  for (Task t : kAllTasks) {
    const auto it = task_losses.find(t);
    if (it == task_losses.end() || !it->second.defined()) {
      throw Error(ErrorCode::kMissingTaskLoss, "missing " + std::string(task_name(t)) + " loss");
    }
    parts.push_back(it->second);
  }
  return ag::scale(ag::add(ag::add(parts[0], parts[1]), parts[2]), 1.0 / 3.0);
}

}  // namespace hamtl::models
