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

#include <cmath>
#include <random>

#include "hamtl/models.hpp"
#include "support.hpp"

using namespace hamtl;
using namespace hamtl::models;
using ag::Tensor;
using hamtl::testing::error_code_of;

namespace {

ModelSpec toy_spec(Variant v, Task task = Task::kCountry) {
  ModelSpec s;
  s.variant = v;
  s.task = task;
  s.vocab_size = 12;
  s.embed_dim = 4;
  s.hidden_size = 2;
  s.heads = 2;
  s.max_len = 6;
  for (Task t : s.tasks()) s.class_counts[t] = 2 + static_cast<std::size_t>(t);
  return s;
}

std::vector<Example> toy_examples(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    ex.tweet_id = std::to_string(i);
    ex.length = 1 + rng() % 6;
    for (std::size_t t = 0; t < 6; ++t) ex.token_ids.push_back(t < ex.length ? 4 + rng() % 8 : 0);
    ex.targets = {static_cast<int>(rng() % 2), static_cast<int>(rng() % 3),
                  static_cast<int>(rng() % 4)};
    out.push_back(ex);
  }
  return out;
}

Batch batch_of(const std::vector<Example>& examples) {
  std::vector<const Example*> ptrs;
  for (const auto& e : examples) ptrs.push_back(&e);
  return make_batch(ptrs, 6);
}

bool starts_with_any(const std::string& name, std::initializer_list<const char*> prefixes) {
  for (const char* p : prefixes) {
    if (name.starts_with(p)) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("mtl_loss examples") {
  auto losses = [](double c, double s, double k) {
    return std::map<Task, Tensor>{{Task::kCity, Tensor::scalar(c)},
                                  {Task::kState, Tensor::scalar(s)},
                                  {Task::kCountry, Tensor::scalar(k)}};
  };
  CHECK(mtl_loss(losses(3, 6, 9)).item() == 6.0);
  CHECK(mtl_loss(losses(0, 0, 0)).item() == 0.0);
  CHECK(std::abs(mtl_loss(losses(0.1, 2.7, 1.3)).item() - mtl_loss(losses(1.3, 0.1, 2.7)).item()) <
        1e-15);
  auto missing = losses(1, 2, 3);
  missing.erase(Task::kState);
  CHECK(error_code_of([&] { mtl_loss(missing); }) == ErrorCode::kMissingTaskLoss);
}

TEST_CASE("spec validation") {
  ModelSpec s = toy_spec(Variant::kHamtl);
  CHECK_NOTHROW(s.validate());
  s.class_counts.erase(Task::kCity);
  CHECK(error_code_of([&] { s.validate(); }) == ErrorCode::kInvalidSpec);
  ModelSpec single = toy_spec(Variant::kSingleTask);
  single.class_counts[Task::kCity] = 3;
  CHECK(error_code_of([&] { single.validate(); }) == ErrorCode::kInvalidSpec);
  ModelSpec heads = toy_spec(Variant::kMtlCommonAttn);
  heads.heads = 3;
  CHECK(error_code_of([&] { heads.validate(); }) == ErrorCode::kInvalidSpec);
  ModelSpec rate = toy_spec(Variant::kHamtl);
  rate.dropout_rate = 1.0;
  CHECK(error_code_of([&] { rate.validate(); }) == ErrorCode::kInvalidSpec);
  CHECK(!parse_order("middle_first"));
  CHECK(default_dropout(Variant::kHamtl) == 0.7);
  CHECK(default_dropout(Variant::kSingleTask) == 0.5);
}

TEST_CASE("spec JSON round trip") {
  for (Variant v : {Variant::kSingleTask, Variant::kGru500Baseline, Variant::kMtlCommonAttn,
                    Variant::kMtlSpecAttn, Variant::kHamtl}) {
    ModelSpec s = toy_spec(v, Task::kState);
    s.order = HamtlOrder::kCountryFirst;
    const ModelSpec back = ModelSpec::from_json(nlohmann::json::parse(s.to_json().dump()));
    CHECK(back.to_json() == s.to_json());
    CHECK(parse_variant(variant_name(v)) == v);
  }
}

TEST_CASE("build_model is seed-deterministic") {
  const ModelSpec s = toy_spec(Variant::kHamtl);
  CHECK(Model(s, 5).snapshot() == Model(s, 5).snapshot());
  CHECK(Model(s, 5).snapshot() != Model(s, 6).snapshot());
}

TEST_CASE("architecture parameter inventories") {
  CHECK(Model(toy_spec(Variant::kMtlSpecAttn), 1).parameter_count() >
        Model(toy_spec(Variant::kMtlCommonAttn), 1).parameter_count());

  auto names = [](Variant v) {
    std::vector<std::string> out;
    const Model m(toy_spec(v), 1);
    for (const auto& p : m.parameters()) out.push_back(p.name);
    return out;
  };
  const auto single = names(Variant::kSingleTask);
  CHECK(std::count_if(single.begin(), single.end(), [](auto& n) { return n.ends_with(".fwd.w"); }) == 3);
  CHECK(std::count_if(single.begin(), single.end(), [](auto& n) { return n.ends_with(".wq"); }) == 1);
  const auto hamtl = names(Variant::kHamtl);
  CHECK(std::count_if(hamtl.begin(), hamtl.end(), [](auto& n) { return n.ends_with(".fwd.w"); }) == 4);
  CHECK(std::count_if(hamtl.begin(), hamtl.end(), [](auto& n) { return n.ends_with(".wq"); }) == 3);
  CHECK(std::find(hamtl.begin(), hamtl.end(), "attn1.wq") == hamtl.end());
  const auto gru = names(Variant::kGru500Baseline);
  CHECK(gru == std::vector<std::string>{"embedding", "gru.w", "gru.u", "gru.b", "head.country.w",
                                        "head.country.b"});
  const auto spec_attn = names(Variant::kMtlSpecAttn);
  CHECK(std::count_if(spec_attn.begin(), spec_attn.end(), [](auto& n) { return n.ends_with(".wq"); }) == 3);
}

TEST_CASE("forward outputs") {
  const auto examples = toy_examples(5, 2);
  const Batch batch = batch_of(examples);
  for (Variant v : {Variant::kSingleTask, Variant::kGru500Baseline, Variant::kMtlCommonAttn,
                    Variant::kMtlSpecAttn, Variant::kHamtl}) {
    const Model m(toy_spec(v), 3);
    const auto out = m.forward(batch, false);
    CHECK(out.probs.size() == m.spec().tasks().size());
    CHECK(out.losses.size() == out.probs.size());
    for (const auto& [task, p] : out.probs) {
      CHECK(p.rows() == 5);
      CHECK(p.cols() == m.spec().class_counts.at(task));
      for (std::size_t r = 0; r < p.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < p.cols(); ++c) s += p.at(r, c);
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
    }
    // Eval mode has no randomness.
    const auto again = m.forward(batch, false, 99);
    for (const auto& [task, p] : out.probs) {
      CHECK(std::equal(p.values().begin(), p.values().end(), again.probs.at(task).values().begin()));
    }
  }
}

TEST_CASE("zero head weights give uniform probabilities") {
  Model m(toy_spec(Variant::kMtlCommonAttn), 4);
  auto params = m.snapshot();
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (m.parameters()[k].name.starts_with("head.")) std::fill(params[k].begin(), params[k].end(), 0.0);
  }
  m.restore(params);
  const auto out = m.forward(batch_of(toy_examples(3, 1)), false);
  for (const auto& [task, p] : out.probs) {
    for (double v : p.values()) CHECK(v == 1.0 / static_cast<double>(p.cols()));
  }
}

TEST_CASE("dropout is active only in training") {
  const Model m(toy_spec(Variant::kSingleTask), 4);
  const Batch batch = batch_of(toy_examples(4, 1));
  const auto a = m.forward(batch, true, 1).probs.at(Task::kCountry);
  const auto b = m.forward(batch, true, 2).probs.at(Task::kCountry);
  const auto c = m.forward(batch, true, 1).probs.at(Task::kCountry);
  CHECK(!std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  CHECK(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
}

TEST_CASE("vocabulary mismatch is rejected") {
  const Model m(toy_spec(Variant::kSingleTask), 4);
  auto examples = toy_examples(2, 1);
  examples[0].token_ids[0] = 12;
  CHECK(error_code_of([&] { m.forward(batch_of(examples), false); }) == ErrorCode::kVocabMismatch);
}

TEST_CASE("make_batch packs padded rows with their targets") {
  auto examples = toy_examples(3, 7);
  examples[1].length = 0;
  examples[2].targets[0] = -1;
  const Batch b = batch_of(examples);
  CHECK(b.layout.batch == 3);
  CHECK(b.layout.lengths[1] == 1);
  CHECK(b.targets.count(Task::kCity) == 0);
  CHECK(b.targets.at(Task::kCountry).size() == 3);
  CHECK(b.token_ids[1 * 6 + 0] == 0);
}

TEST_CASE("GRU baseline reads the last real state") {
  const Model m(toy_spec(Variant::kGru500Baseline), 8);
  auto examples = toy_examples(1, 3);
  examples[0].length = 3;
  const auto base = m.forward(batch_of(examples), false).probs.at(Task::kCountry);
  examples[0].token_ids[4] = 9;  // padding slot
  const auto pad = m.forward(batch_of(examples), false).probs.at(Task::kCountry);
  examples[0].token_ids[2] = examples[0].token_ids[2] == 5 ? 6 : 5;
  const auto last = m.forward(batch_of(examples), false).probs.at(Task::kCountry);
  CHECK(std::equal(base.values().begin(), base.values().end(), pad.values().begin()));
  CHECK(!std::equal(base.values().begin(), base.values().end(), last.values().begin()));
}

TEST_CASE("HA-MTL taps: a task sees only the layers below its head") {
  for (HamtlOrder order : {HamtlOrder::kCityFirst, HamtlOrder::kCountryFirst}) {
    ModelSpec s = toy_spec(Variant::kHamtl);
    s.order = order;
    const Task low = order == HamtlOrder::kCityFirst ? Task::kCity : Task::kCountry;
    const Task high = order == HamtlOrder::kCityFirst ? Task::kCountry : Task::kCity;
    Model m(s, 9);
    const Batch batch = batch_of(toy_examples(4, 5));

    // Zeroing layer-3/4 parameters cannot change the layer-2 task's output.
    const auto before = m.forward(batch, false).probs.at(low);
    auto params = m.snapshot();
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (starts_with_any(m.parameters()[k].name, {"bigru3", "bigru4", "attn3", "attn4"})) {
        std::fill(params[k].begin(), params[k].end(), 0.0);
      }
    }
    Model zeroed(s, 9);
    zeroed.restore(params);
    const auto after = zeroed.forward(batch, false).probs.at(low);
    CHECK(std::equal(before.values().begin(), before.values().end(), after.values().begin()));

    m.zero_grad();
    ag::backward(m.forward(batch, true, 1).losses.at(low));
    for (const auto& p : m.parameters()) {
      if (!starts_with_any(p.name, {"bigru3", "bigru4", "attn3", "attn4", "head.state"}) &&
          p.name != "head." + std::string(task_name(high)) + ".w" &&
          p.name != "head." + std::string(task_name(high)) + ".b") {
        continue;
      }
      for (double g : p.tensor.grad()) CHECK(g == 0.0);
    }

    m.zero_grad();
    ag::backward(m.forward(batch, true, 1).losses.at(high));
    double norm = 0.0;
    for (const auto& p : m.parameters()) {
      if (p.name.starts_with("bigru2")) {
        for (double g : p.tensor.grad()) norm += g * g;
      }
    }
    CHECK(norm > 0.0);
  }
}

TEST_CASE("MTL loss gradient is the mean of the task gradients") {
  Model m(toy_spec(Variant::kHamtl), 10);
  const Batch batch = batch_of(toy_examples(4, 6));
  auto grads = [&](const std::function<Tensor(const ModelOutput&)>& pick) {
    m.zero_grad();
    ag::backward(pick(m.forward(batch, true, 3)));
    std::vector<std::vector<double>> g;
    for (const auto& p : m.parameters()) g.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
    return g;
  };
  const auto total = grads([&](const ModelOutput& o) { return m.objective(o); });
  std::vector<std::vector<std::vector<double>>> per_task;
  for (Task t : kAllTasks) per_task.push_back(grads([&](const ModelOutput& o) { return o.losses.at(t); }));
  for (std::size_t k = 0; k < total.size(); ++k) {
    for (std::size_t i = 0; i < total[k].size(); ++i) {
      const double mean = (per_task[0][k][i] + per_task[1][k][i] + per_task[2][k][i]) / 3.0;
      CHECK(std::abs(total[k][i] - mean) < 1e-10);
    }
  }
}
