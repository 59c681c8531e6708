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

#include "hamtl/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <unordered_map>

#include "hamtl/error.hpp"

namespace hamtl::eval {
namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

MetricsReport compute_metrics(std::span<const int> y_true, std::span<const int> y_pred,
                              std::size_t n_classes) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(y_true.size()) + " gold vs " +
                                                std::to_string(y_pred.size()) + " predicted");
  }
  MetricsReport r;
  r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  r.total = y_true.size();
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    for (int y : {y_true[i], y_pred[i]}) {
      if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
        throw Error(ErrorCode::kUnknownLabel, "label index " + std::to_string(y));
      }
    }
    ++r.confusion[y_true[i]][y_pred[i]];
  }

  std::vector<std::size_t> predicted(n_classes, 0);
  std::size_t correct = 0;
  for (std::size_t t = 0; t < n_classes; ++t) {
    correct += r.confusion[t][t];
    for (std::size_t p = 0; p < n_classes; ++p) predicted[p] += r.confusion[t][p];
  }
  r.accuracy = 100.0 * ratio(static_cast<double>(correct), static_cast<double>(r.total));

  double f1_sum = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    ClassMetrics m;
    m.label = std::to_string(c);
    for (std::size_t p = 0; p < n_classes; ++p) m.support += r.confusion[c][p];
    const double tp = static_cast<double>(r.confusion[c][c]);
    m.precision = 100.0 * ratio(tp, static_cast<double>(predicted[c]));
    m.recall = 100.0 * ratio(tp, static_cast<double>(m.support));
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    f1_sum += m.f1;
    r.per_class.push_back(std::move(m));
  }
  r.macro_f1 = ratio(f1_sum, static_cast<double>(n_classes));
  for (std::size_t c = 0; c < n_classes; ++c) r.classes.push_back(r.per_class[c].label);
  return r;
}

MetricsReport compute_metrics(std::span<const std::string> y_true,
                              std::span<const std::string> y_pred,
                              std::span<const std::string> class_set) {
  std::unordered_map<std::string, int> index;
  for (const auto& c : class_set) index.emplace(c, static_cast<int>(index.size()));
  auto encode = [&](std::span<const std::string> labels) {
    std::vector<int> out;
    out.reserve(labels.size());
    for (const auto& l : labels) {
      const auto it = index.find(l);
      if (it == index.end()) throw Error(ErrorCode::kUnknownLabel, "'" + l + "' not in class set");
      out.push_back(it->second);
    }
    return out;
  };
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(y_true.size()) + " gold vs " +
                                                std::to_string(y_pred.size()) + " predicted");
  }
  MetricsReport r = compute_metrics(encode(y_true), encode(y_pred), class_set.size());
  for (std::size_t c = 0; c < class_set.size(); ++c) {
    r.classes[c] = class_set[c];
    r.per_class[c].label = class_set[c];
  }
  return r;
}

nlohmann::ordered_json metrics_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["total"] = report.total;
  j["accuracy"] = report.accuracy;
  j["macro_f1"] = report.macro_f1;
  j["classes"] = report.classes;
  auto per_class = nlohmann::ordered_json::array();
  for (const auto& m : report.per_class) {
    per_class.push_back({{"label", m.label},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"support", m.support}});
  }
  j["per_class"] = per_class;
  j["confusion"] = report.confusion;
  return j;
}

void write_metrics_csv(const MetricsReport& report, std::ostream& out) {
  out << "label,precision,recall,f1,support\n";
  for (const auto& m : report.per_class) {
    out << m.label << ',' << fmt(m.precision) << ',' << fmt(m.recall) << ',' << fmt(m.f1) << ','
        << m.support << '\n';
  }
  out << "macro,,," << fmt(report.macro_f1) << ',' << report.total << '\n';
  out << "accuracy,,," << fmt(report.accuracy) << ',' << report.total << '\n';
}

MajorityBaseline majority_baseline(std::span<const std::string> train_labels) {
  if (train_labels.empty()) throw Error(ErrorCode::kEmptyInput, "no training labels");
  std::map<std::string, std::size_t> counts;
  for (const auto& l : train_labels) ++counts[l];
  // map iterates in lexicographic order, so strict > keeps the smallest label
  // among equally frequent ones.
  MajorityBaseline best;
  std::size_t best_count = 0;
  for (const auto& [label, n] : counts) {
    if (n > best_count) {
      best = {label};
      best_count = n;
    }
  }
  return best;
}

UserPrediction user_level_predict(std::span<const TweetVote> per_tweet, std::size_t n,
                                  double threshold) {
  if (per_tweet.empty() || n == 0) {
    throw Error(ErrorCode::kEmptyPredictions, "user has no tweet predictions");
  }
  UserPrediction out;
  out.threshold = threshold;
  const auto window = per_tweet.first(std::min(n, per_tweet.size()));
  out.votes.assign(window.begin(), window.end());

  struct Tally {
    std::size_t count = 0;
    double confidence = 0.0;
  };
  auto tally = [&](bool use_threshold) {
    std::map<std::string, Tally> t;
    for (const auto& v : window) {
      if (use_threshold && v.confidence < threshold) continue;
      auto& e = t[v.label];
      ++e.count;
      e.confidence += v.confidence;
    }
    return t;
  };
  auto votes = tally(true);
  if (votes.empty()) votes = tally(false);

  const Tally* best = nullptr;
  for (const auto& [label, t] : votes) {
    out.n_tweets_used += t.count;
    if (best == nullptr || t.count > best->count ||
        (t.count == best->count && t.confidence > best->confidence)) {
      best = &t;
      out.label = label;
    }
  }
  return out;
}

std::vector<UserEvalRow> user_level_sweep(std::span<const UserCase> users,
                                          std::span<const std::size_t> ns,
                                          std::span<const double> thresholds,
                                          std::span<const std::string> class_set) {
  std::vector<UserEvalRow> rows;
  std::vector<std::string> gold, pred;
  for (const auto& u : users) gold.push_back(u.gold);
  for (std::size_t n : ns) {
    for (double th : thresholds) {
      pred.clear();
      for (const auto& u : users) pred.push_back(user_level_predict(u.votes, n, th).label);
      const auto r = compute_metrics(gold, pred, class_set);
      rows.push_back({n, th, r.accuracy, r.macro_f1});
    }
  }
  return rows;
}

void write_usereval_csv(std::span<const UserEvalRow> rows, std::ostream& out) {
  out << "n,acc,thresh,F1,thresh\n";
  for (const auto& r : rows) {
    out << r.n << ',' << fmt(r.accuracy) << ',' << fmt(r.threshold) << ',' << fmt(r.macro_f1)
        << ',' << fmt(r.threshold) << '\n';
  }
}

void write_usereval_best_csv(std::span<const UserEvalRow> rows, std::ostream& out) {
  out << "n,acc,thresh,F1,thresh\n";
  std::vector<std::size_t> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.n) == order.end()) order.push_back(r.n);
  }
  for (std::size_t n : order) {
    const UserEvalRow* acc = nullptr;
    const UserEvalRow* f1 = nullptr;
    for (const auto& r : rows) {
      if (r.n != n) continue;
      if (acc == nullptr || r.accuracy > acc->accuracy) acc = &r;
      if (f1 == nullptr || r.macro_f1 > f1->macro_f1) f1 = &r;
    }
    out << n << ',' << fmt(acc->accuracy) << ',' << fmt(acc->threshold) << ','
        << fmt(f1->macro_f1) << ',' << fmt(f1->threshold) << '\n';
  }
}

}  // namespace hamtl::eval
