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

#include "hamtl/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "hamtl/error.hpp"
#include "hamtl/hash.hpp"
#include "hamtl/utf8.hpp"

namespace hamtl::training {
namespace {

Example to_example(const corpus::TweetRecord& r) {
  Example ex;
  ex.tweet_id = r.tweet_id;
  ex.token_ids = r.token_ids;
  ex.length = r.mask_len;
  ex.source = r.label_source;
  return ex;
}

std::size_t batch_steps(std::span<const Example* const> batch) {
  std::size_t steps = 1;
  for (const Example* ex : batch) steps = std::max(steps, std::min(ex->length, ex->token_ids.size()));
  return steps;
}

std::vector<const Example*> pointers(std::span<const Example> examples) {
  std::vector<const Example*> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(&ex);
  return out;
}

}  // namespace

ClassLists class_lists(const geo::LocationHierarchy& hierarchy, const std::vector<Task>& tasks) {
  ClassLists out;
  for (Task t : tasks) out[t] = hierarchy.classes(t);
  return out;
}

std::vector<Example> make_examples(const std::vector<corpus::TweetRecord>& records,
                                   const ClassLists& classes) {
  std::map<Task, std::unordered_map<std::string, int>> index;
  for (const auto& [task, names] : classes) {
    for (std::size_t k = 0; k < names.size(); ++k) index[task].emplace(names[k], static_cast<int>(k));
  }
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    Example ex = to_example(r);
    if (r.labels) {
      for (const auto& [task, lookup] : index) {
        const std::string& label = r.labels->get(task);
        if (label.empty()) continue;
        const auto it = lookup.find(label);
        if (it == lookup.end()) {
          throw Error(ErrorCode::kUnknownLabel, std::string(task_name(task)) + " label '" +
                                                    label + "' of " + r.tweet_id);
        }
        ex.targets[static_cast<std::size_t>(task)] = it->second;
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (max_epochs < 1) throw Error(ErrorCode::kInvalidArgument, "max_epochs must be >= 1");
  if (patience > max_epochs) throw Error(ErrorCode::kInvalidArgument, "patience exceeds max_epochs");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning_rate must be > 0");
}

EarlyStopResult run_early_stopping(std::size_t max_epochs, std::size_t patience,
                                   const std::function<EpochOutcome(std::size_t)>& run_epoch,
                                   const std::function<void(std::size_t)>& on_new_best) {
  EarlyStopResult r;
  for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
    const EpochOutcome o = run_epoch(epoch);
    r.epochs_run = epoch;
    if (r.best_epoch == 0 || o.value > r.best_value) {
      r.best_epoch = epoch;
      r.best_value = o.value;
      if (on_new_best) on_new_best(epoch);
    }
    if (o.stop || epoch - r.best_epoch >= patience) break;
  }
  return r;
}

std::map<Task, std::vector<Prediction>> predict(const Model& model,
                                                std::span<const Example> examples,
                                                std::size_t batch_size) {
  ag::NoGradGuard no_grad;
  std::map<Task, std::vector<Prediction>> out;
  for (Task t : model.spec().tasks()) out[t].reserve(examples.size());
  const auto all = pointers(examples);
  for (std::size_t begin = 0; begin < all.size(); begin += batch_size) {
    const auto chunk = std::span(all).subspan(begin, std::min(batch_size, all.size() - begin));
    const auto output = model.forward(models::make_batch(chunk, batch_steps(chunk)), false);
    for (const auto& [task, probs] : output.probs) {
      for (std::size_t r = 0; r < probs.rows(); ++r) {
        Prediction p;
        for (std::size_t c = 0; c < probs.cols(); ++c) {
          if (probs.at(r, c) > p.confidence || p.label < 0) {
            p.label = static_cast<int>(c);
            p.confidence = probs.at(r, c);
          }
        }
        out[task].push_back(p);
      }
    }
  }
  return out;
}

std::map<Task, eval::MetricsReport> evaluate(const Model& model,
                                             std::span<const Example> examples,
                                             std::size_t batch_size) {
  std::map<Task, eval::MetricsReport> out;
  const auto preds = predict(model, examples, batch_size);
  for (const auto& [task, p] : preds) {
    std::vector<int> gold, guess;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (examples[i].target(task) < 0) continue;
      gold.push_back(examples[i].target(task));
      guess.push_back(p[i].label);
    }
    if (gold.empty()) continue;
    out[task] = eval::compute_metrics(gold, guess, model.spec().class_counts.at(task));
  }
  return out;
}

TrainResult train(Model& model, std::span<const Example> train_set,
                  std::span<const Example> dev_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw Error(ErrorCode::kEmptyTrainSet, "no training examples");
  // Without a dev set, selection falls back to the training data.
  const auto selection_set = dev_set.empty() ? train_set : dev_set;

  auto params = model.parameter_tensors();
  model.zero_grad();
  ag::AdamState adam = ag::make_adam_state(params, config.learning_rate);
  const std::uint64_t dropout_root = combine_seed(config.seed, "dropout");
  const std::uint64_t shuffle_root = combine_seed(config.seed, "shuffle");

  TrainResult result;
  std::vector<std::size_t> order(train_set.size());

  auto run_epoch = [&](std::size_t epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(combine_seed(shuffle_root, epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::vector<const Example*> chunk;
    for (std::size_t begin = 0, b = 0; begin < order.size(); begin += config.batch_size, ++b) {
      chunk.clear();
      for (std::size_t i = begin; i < std::min(order.size(), begin + config.batch_size); ++i) {
        chunk.push_back(&train_set[order[i]]);
      }
      if (config.on_batch) config.on_batch(chunk);
      const auto batch = models::make_batch(chunk, batch_steps(chunk));
      const auto output =
          model.forward(batch, true, combine_seed(dropout_root, (epoch << 32) | b));
      const ag::Tensor loss = model.objective(output);
      ag::backward(loss);
      ag::adam_step(params, adam);
      loss_sum += loss.item() * static_cast<double>(chunk.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    for (const auto& [task, report] : evaluate(model, selection_set)) {
      rec.dev_accuracy[task] = report.accuracy;
      rec.dev_macro_f1[task] = report.macro_f1;
    }
    if (config.selection == SelectionMetric::kTaskAccuracy) {
      const auto it = rec.dev_accuracy.find(config.selection_task);
      if (it == rec.dev_accuracy.end()) {
        throw Error(ErrorCode::kInvalidArgument, "selection task " +
                                                     std::string(task_name(config.selection_task)) +
                                                     " has no dev labels");
      }
      rec.selection_value = it->second;
    } else if (!rec.dev_accuracy.empty()) {
      double s = 0.0;
      for (const auto& [task, acc] : rec.dev_accuracy) s += acc;
      rec.selection_value = s / static_cast<double>(rec.dev_accuracy.size());
    }
    result.history.push_back(rec);
    const bool keep_going = !config.on_epoch || config.on_epoch(rec, model);
    return EpochOutcome{rec.selection_value, !keep_going};
  };

  const auto stop = run_early_stopping(config.max_epochs, config.patience, run_epoch,
                                       [&](std::size_t) { result.best_parameters = model.snapshot(); });
  result.best_epoch = stop.best_epoch;
  result.best_value = stop.best_value;
  model.restore(result.best_parameters);
  return result;
}

void write_history_csv(std::span<const EpochRecord> history, std::ostream& out) {
  out << "epoch,train_loss,dev_acc_city,dev_acc_state,dev_acc_country,"
         "dev_f1_city,dev_f1_state,dev_f1_country\n";
  char buf[64];
  auto cell = [&](const std::map<Task, double>& m, Task t) {
    const auto it = m.find(t);
    if (it == m.end()) return std::string();
    std::snprintf(buf, sizeof buf, "%.6f", it->second);
    return std::string(buf);
  };
  for (const auto& rec : history) {
    std::snprintf(buf, sizeof buf, "%.6f", rec.train_loss);
    out << rec.epoch << ',' << buf;
    for (Task t : kAllTasks) out << ',' << cell(rec.dev_accuracy, t);
    for (Task t : kAllTasks) out << ',' << cell(rec.dev_macro_f1, t);
    out << '\n';
  }
}

// --- self-training -------------------------------------------------------

void SelfTrainConfig::validate() const {
  if (!(top_pct > 0.0 && top_pct <= 100.0)) {
    throw Error(ErrorCode::kInvalidArgument, "top_pct must lie in (0, 100]");
  }
}

std::size_t selection_count(std::size_t n, double top_pct) {
  const double x = static_cast<double>(n) * top_pct / 100.0;
  const auto k = static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
  return std::min(k, n);
}

std::vector<std::size_t> select_confident(std::span<const ScoredRecord> scored,
                                          SelfTrainMode mode, double top_pct) {
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].confidence != scored[b].confidence) {
      return scored[a].confidence > scored[b].confidence;
    }
    return scored[a].tweet_id < scored[b].tweet_id;
  });
  if (mode == SelfTrainMode::kClassAgnostic) {
    order.resize(selection_count(order.size(), top_pct));
    return order;
  }
  std::map<int, std::size_t> group_size, taken;
  for (const auto& s : scored) ++group_size[s.predicted];
  std::vector<std::size_t> out;
  for (std::size_t i : order) {
    const int c = scored[i].predicted;
    if (taken[c] < selection_count(group_size[c], top_pct)) {
      ++taken[c];
      out.push_back(i);
    }
  }
  return out;
}

bool passes_pool_filters(const corpus::TweetRecord& record, const SelfTrainConfig& cfg) {
  if (cfg.replies_only && !record.raw_text.starts_with('@')) return false;
  if (cfg.require_zero_diacritics) {
    for (char32_t cp : utf8::decode(record.raw_text)) {
      if (corpus::is_arabic_diacritic(cp)) return false;
    }
  }
  if (cfg.min_tokens) {
    const std::string norm =
        record.normalized_text.empty() ? corpus::normalize_text(record.raw_text) : record.normalized_text;
    if (corpus::tokenize(norm).size() < *cfg.min_tokens) return false;
  }
  return true;
}

std::vector<corpus::TweetRecord> self_train_select(const Model& model,
                                                   const std::vector<corpus::TweetRecord>& pool,
                                                   const SelfTrainConfig& cfg,
                                                   const corpus::Vocabulary& vocab,
                                                   const ClassLists& classes) {
  cfg.validate();
  const auto tasks = model.spec().tasks();
  if (std::find(tasks.begin(), tasks.end(), cfg.task) == tasks.end()) {
    throw Error(ErrorCode::kInvalidArgument,
                "model has no " + std::string(task_name(cfg.task)) + " head");
  }
  std::vector<corpus::TweetRecord> kept;
  for (const auto& r : pool) {
    if (!passes_pool_filters(r, cfg)) continue;
    kept.push_back(r);
    if (kept.back().token_ids.empty()) corpus::prepare_record(kept.back(), vocab, model.spec().max_len);
  }
  if (kept.empty()) throw Error(ErrorCode::kEmptyPool, "no unlabeled tweets left after filtering");

  std::vector<Example> examples;
  examples.reserve(kept.size());
  for (const auto& r : kept) examples.push_back(to_example(r));
  const auto preds = predict(model, examples);

  std::vector<ScoredRecord> scored;
  scored.reserve(kept.size());
  const auto& ranked = preds.at(cfg.task);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    scored.push_back({kept[i].tweet_id, ranked[i].label, ranked[i].confidence});
  }

  std::vector<corpus::TweetRecord> out;
  for (std::size_t i : select_confident(scored, cfg.mode, cfg.top_pct)) {
    corpus::TweetRecord r = kept[i];
    LabelTriple labels;
    for (const auto& [task, p] : preds) labels.get(task) = classes.at(task).at(p[i].label);
    r.labels = labels;
    r.label_source = corpus::LabelSource::kPseudo;
    r.confidence = scored[i].confidence;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<corpus::TweetRecord> augment(const std::vector<corpus::TweetRecord>& labeled,
                                         const std::vector<corpus::TweetRecord>& pseudo) {
  std::vector<corpus::TweetRecord> out = labeled;
  std::unordered_set<std::string> seen;
  for (const auto& r : labeled) seen.insert(r.tweet_id);
  for (const auto& r : pseudo) {
    if (seen.insert(r.tweet_id).second) out.push_back(r);
  }
  return out;
}

// --- weak supervision ----------------------------------------------------

std::string_view weak_regime_name(WeakRegime regime) {
  switch (regime) {
    case WeakRegime::kWeak: return "weak";
    case WeakRegime::kWeakPlusGold: return "weak_plus_gold";
    case WeakRegime::kWeakThenGold: return "weak_then_gold";
  }
  return "weak";
}

std::optional<WeakRegime> parse_weak_regime(std::string_view name) {
  for (auto r : {WeakRegime::kWeak, WeakRegime::kWeakPlusGold, WeakRegime::kWeakThenGold}) {
    if (weak_regime_name(r) == name) return r;
  }
  return std::nullopt;
}

WeakRegimeResult run_weak_regime(WeakRegime regime, std::span<const Example> weak,
                                 std::span<const Example> gold, std::span<const Example> dev,
                                 const models::ModelSpec& spec, std::uint64_t model_seed,
                                 const TrainConfig& config) {
  if (weak.empty() || (regime != WeakRegime::kWeak && gold.empty())) {
    throw Error(ErrorCode::kEmptySets, std::string(weak_regime_name(regime)) +
                                           " needs non-empty weak" +
                                           (regime == WeakRegime::kWeak ? "" : " and gold") +
                                           " sets");
  }
  WeakRegimeResult r{Model(spec, model_seed), {}, std::nullopt, {}};
  switch (regime) {
    case WeakRegime::kWeak:
      r.phase1 = train(r.model, weak, dev, config);
      break;
    case WeakRegime::kWeakPlusGold: {
      std::vector<Example> mixed(weak.begin(), weak.end());
      mixed.insert(mixed.end(), gold.begin(), gold.end());
      std::mt19937_64 rng(combine_seed(config.seed, "weak_plus_gold"));
      std::shuffle(mixed.begin(), mixed.end(), rng);
      r.phase1 = train(r.model, mixed, dev, config);
      break;
    }
    case WeakRegime::kWeakThenGold:
      r.phase1 = train(r.model, weak, dev, config);
      r.phase2_initial = r.model.snapshot();
      r.phase2 = train(r.model, gold, dev, config);
      break;
  }
  return r;
}

}  // namespace hamtl::training
