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

// Supervised training with early stopping, self-training selection over an
// unlabeled pool, and the weak-supervision regimes.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hamtl/corpus.hpp"
#include "hamtl/evaluation.hpp"
#include "hamtl/geo.hpp"
#include "hamtl/labels.hpp"
#include "hamtl/models.hpp"

namespace hamtl::training {

using models::Example;
using models::Model;

// Index -> label name for each task the data is encoded against.
using ClassLists = std::map<Task, std::vector<std::string>>;

ClassLists class_lists(const geo::LocationHierarchy& hierarchy, const std::vector<Task>& tasks);

// Records must already carry token ids. An empty label leaves the target
// missing; a label outside the class list throws UnknownLabel.
std::vector<Example> make_examples(const std::vector<corpus::TweetRecord>& records,
                                   const ClassLists& classes);

enum class SelectionMetric { kTaskAccuracy, kMeanTaskAccuracy };

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::map<Task, double> dev_accuracy;
  std::map<Task, double> dev_macro_f1;
  double selection_value = 0.0;
};

struct TrainConfig {
  std::size_t max_epochs = 15;
  std::size_t patience = 5;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  SelectionMetric selection = SelectionMetric::kMeanTaskAccuracy;
  Task selection_task = Task::kCountry;

  // Sees every mini-batch before its update.
  std::function<void(std::span<const Example* const>)> on_batch;
  // Called after each epoch's dev evaluation; returning false stops training.
  std::function<bool(const EpochRecord&, const Model&)> on_epoch;

  // Throws InvalidArgument.
  void validate() const;
};

struct EarlyStopResult {
  std::size_t best_epoch = 0;
  double best_value = 0.0;
  std::size_t epochs_run = 0;
};

struct EpochOutcome {
  double value = 0.0;
  bool stop = false;  // end training after this epoch
};

// Drives run_epoch(epoch) for epochs 1..max_epochs, stopping once patience
// epochs pass without a strictly greater value.
EarlyStopResult run_early_stopping(std::size_t max_epochs, std::size_t patience,
                                   const std::function<EpochOutcome(std::size_t)>& run_epoch,
                                   const std::function<void(std::size_t)>& on_new_best = {});

struct TrainResult {
  std::vector<std::vector<double>> best_parameters;
  std::size_t best_epoch = 0;
  double best_value = 0.0;
  std::vector<EpochRecord> history;
};

// Trains in place and leaves the model holding its best parameters. Throws
// EmptyTrainSet.
TrainResult train(Model& model, std::span<const Example> train_set,
                  std::span<const Example> dev_set, const TrainConfig& config);

struct Prediction {
  int label = -1;
  double confidence = 0.0;
};

std::map<Task, std::vector<Prediction>> predict(const Model& model,
                                                std::span<const Example> examples,
                                                std::size_t batch_size = 64);

// Per-task metrics over the examples that carry that task's target.
std::map<Task, eval::MetricsReport> evaluate(const Model& model,
                                             std::span<const Example> examples,
                                             std::size_t batch_size = 64);

void write_history_csv(std::span<const EpochRecord> history, std::ostream& out);

// --- self-training -------------------------------------------------------

enum class SelfTrainMode { kClassAgnostic, kClassSpecific };

struct SelfTrainConfig {
  SelfTrainMode mode = SelfTrainMode::kClassAgnostic;
  double top_pct = 10.0;
  std::optional<std::size_t> min_tokens;
  bool require_zero_diacritics = false;
  bool replies_only = false;
  // Head whose confidence ranks the pool.
  Task task = Task::kCountry;

  // Throws InvalidArgument.
  void validate() const;
};

// ceil(n * pct / 100), robust to binary rounding of the product.
std::size_t selection_count(std::size_t n, double top_pct);

struct ScoredRecord {
  std::string tweet_id;
  int predicted = -1;
  double confidence = 0.0;
};

// Indices of the selected entries, ordered by (confidence desc, tweet_id asc).
std::vector<std::size_t> select_confident(std::span<const ScoredRecord> scored,
                                          SelfTrainMode mode, double top_pct);

bool passes_pool_filters(const corpus::TweetRecord& record, const SelfTrainConfig& cfg);

// Records lacking token ids are encoded with vocab first. Throws EmptyPool.
std::vector<corpus::TweetRecord> self_train_select(const Model& model,
                                                   const std::vector<corpus::TweetRecord>& pool,
                                                   const SelfTrainConfig& cfg,
                                                   const corpus::Vocabulary& vocab,
                                                   const ClassLists& classes);

// Gold records followed by pseudo records whose tweet ids are not already
// labeled.
std::vector<corpus::TweetRecord> augment(const std::vector<corpus::TweetRecord>& labeled,
                                         const std::vector<corpus::TweetRecord>& pseudo);

// --- weak supervision ----------------------------------------------------

enum class WeakRegime { kWeak, kWeakPlusGold, kWeakThenGold };

std::string_view weak_regime_name(WeakRegime regime);
std::optional<WeakRegime> parse_weak_regime(std::string_view name);

struct WeakRegimeResult {
  Model model;
  TrainResult phase1;
  std::optional<TrainResult> phase2;
  // Parameters the gold phase of WeakThenGold started from.
  std::vector<std::vector<double>> phase2_initial;
};

// Dev data is always gold. Throws EmptySets.
WeakRegimeResult run_weak_regime(WeakRegime regime, std::span<const Example> weak,
                                 std::span<const Example> gold, std::span<const Example> dev,
                                 const models::ModelSpec& spec, std::uint64_t model_seed,
                                 const TrainConfig& config);

}  // namespace hamtl::training
