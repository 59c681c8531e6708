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

// Tweet-level metrics, the majority-class baseline and user-level voting.
// All percentages are on the 0-100 scale.

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace hamtl::eval {

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MetricsReport {
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> confusion;  // [true][pred]
  std::size_t total = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
};

// Labels are indices into a class set of n_classes entries. Throws
// LengthMismatch and UnknownLabel.
MetricsReport compute_metrics(std::span<const int> y_true, std::span<const int> y_pred,
                              std::size_t n_classes);

MetricsReport compute_metrics(std::span<const std::string> y_true,
                              std::span<const std::string> y_pred,
                              std::span<const std::string> class_set);

nlohmann::ordered_json metrics_json(const MetricsReport& report);
// One row per class plus a final "macro" row.
void write_metrics_csv(const MetricsReport& report, std::ostream& out);

struct MajorityBaseline {
  std::string label;
  std::string predict() const { return label; }
};

// Throws EmptyInput.
MajorityBaseline majority_baseline(std::span<const std::string> train_labels);

struct TweetVote {
  std::string label;
  double confidence = 0.0;
};

struct UserPrediction {
  std::string user_id;
  std::vector<TweetVote> votes;
  std::size_t n_tweets_used = 0;
  double threshold = 0.0;
  std::string label;
};

// Votes over the first n predictions whose confidence is at least the
// threshold, falling back to all n when none survive. Ties go to the larger
// summed confidence, then to the smaller label. Throws EmptyPredictions.
UserPrediction user_level_predict(std::span<const TweetVote> per_tweet, std::size_t n,
                                  double threshold);

struct UserCase {
  std::string user_id;
  std::string gold;
  std::vector<TweetVote> votes;  // in tweet order
};

struct UserEvalRow {
  std::size_t n = 0;
  double threshold = 0.0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

// One row per (n, threshold) pair, n-major.
std::vector<UserEvalRow> user_level_sweep(std::span<const UserCase> users,
                                          std::span<const std::size_t> ns,
                                          std::span<const double> thresholds,
                                          std::span<const std::string> class_set);

// Columns n,acc,thresh,F1,thresh. The per-pair table repeats the row's
// threshold in both thresh columns; the best table carries, per n, the best
// accuracy and the best F1 with the threshold that achieved each.
void write_usereval_csv(std::span<const UserEvalRow> rows, std::ostream& out);
void write_usereval_best_csv(std::span<const UserEvalRow> rows, std::ostream& out);

}  // namespace hamtl::eval
