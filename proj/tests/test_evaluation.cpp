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
#include <sstream>

#include "hamtl/evaluation.hpp"
#include "support.hpp"

using namespace hamtl;
using namespace hamtl::eval;
using hamtl::testing::error_code_of;
using V = std::vector<std::string>;

TEST_CASE("compute_metrics examples") {
  const V classes = {"a", "b", "c"};
  const auto perfect = compute_metrics(V{"a", "b", "c"}, V{"a", "b", "c"}, classes);
  CHECK(perfect.accuracy == 100.0);
  CHECK(perfect.macro_f1 == 100.0);

  const auto r = compute_metrics(V{"a", "a", "b", "c"}, V{"a", "b", "b", "b"}, classes);
  CHECK(r.accuracy == 50.0);
  CHECK(std::round(r.macro_f1 * 100.0) / 100.0 == 38.89);
  CHECK(std::abs(r.per_class[0].f1 - 200.0 / 3.0) < 1e-9);
  CHECK(std::abs(r.per_class[1].f1 - 50.0) < 1e-9);
  CHECK(r.per_class[2].f1 == 0.0);
  CHECK(r.confusion[0][1] == 1);
  CHECK(r.per_class[1].label == "b");

  for (std::size_t k : {2, 4, 5}) {
    std::vector<int> truth, pred;
    for (std::size_t c = 0; c < k; ++c) {
      for (int i = 0; i < 3; ++i) {
        truth.push_back(static_cast<int>(c));
        pred.push_back(0);
      }
    }
    CHECK(std::abs(compute_metrics(truth, pred, k).accuracy - 100.0 / static_cast<double>(k)) < 1e-12);
  }
}

TEST_CASE("compute_metrics errors") {
  const V classes = {"a", "b"};
  CHECK(error_code_of([&] { compute_metrics(V{"a"}, V{"a", "b"}, classes); }) ==
        ErrorCode::kLengthMismatch);
  CHECK(error_code_of([&] { compute_metrics(V{"a"}, V{"z"}, classes); }) == ErrorCode::kUnknownLabel);
}

TEST_CASE("compute_metrics matches the brute-force oracle") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 8);
    const std::size_t n = rng() % 201;
    std::vector<int> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = static_cast<int>(rng() % k);
      p[i] = rng() % 3 == 0 ? t[i] : static_cast<int>(rng() % k);
    }
    const auto got = compute_metrics(t, p, static_cast<std::size_t>(k));
    const auto want = testing::brute_force_metrics(t, p, k);
    CHECK(std::abs(got.accuracy - want.accuracy) < 1e-9);
    CHECK(std::abs(got.macro_f1 - want.macro_f1) < 1e-9);
    for (int c = 0; c < k; ++c) CHECK(std::abs(got.per_class[c].f1 - want.f1[c]) < 1e-9);
    CHECK(got.macro_f1 <= 100.0);
    CHECK(got.accuracy <= 100.0);
  }
}

TEST_CASE("majority baseline") {
  CHECK(majority_baseline(V{"a", "a", "b"}).predict() == "a");
  CHECK(majority_baseline(V{"b", "a", "b", "a"}).predict() == "a");
  CHECK(error_code_of([] { majority_baseline(V{}); }) == ErrorCode::kEmptyInput);

  const V test = {"a", "b", "b", "c", "a", "a"};
  const auto base = majority_baseline(V{"a", "a", "b"});
  const V pred(test.size(), base.predict());
  const auto r = compute_metrics(test, pred, V{"a", "b", "c"});
  CHECK(r.accuracy == 50.0);
  int nonzero = 0;
  for (const auto& m : r.per_class) nonzero += m.f1 > 0.0;
  CHECK(nonzero == 1);

  const V balanced = {"a", "b", "c", "a", "b", "c"};
  const auto rb = compute_metrics(balanced, V(6, "a"), V{"a", "b", "c"});
  CHECK(rb.macro_f1 <= rb.accuracy);
}

TEST_CASE("user_level_predict examples") {
  const std::vector<TweetVote> plain = {{"eg", 0.9}, {"eg", 0.8}, {"sa", 0.7}};
  CHECK(user_level_predict(plain, 3, 0.0).label == "eg");
  const std::vector<TweetVote> thresh = {{"eg", 0.9}, {"sa", 0.95}, {"sa", 0.96}};
  const auto u = user_level_predict(thresh, 3, 0.92);
  CHECK(u.label == "sa");
  CHECK(u.n_tweets_used == 2);
  CHECK(error_code_of([] { user_level_predict({}, 3, 0.0); }) == ErrorCode::kEmptyPredictions);
}

TEST_CASE("user_level_predict windowing with fallback and tie breaks") {
  const std::vector<TweetVote> v = {{"a", 0.5}, {"b", 0.6}, {"b", 0.6}, {"a", 0.9}, {"a", 0.9}};
  CHECK(user_level_predict(v, 3, 0.0).label == "b");
  CHECK(user_level_predict(v, 5, 0.0).label == "a");
  // Every vote filtered: fall back to the plain majority of the window.
  const auto all_low = user_level_predict(v, 3, 0.99);
  CHECK(all_low.label == "b");
  CHECK(all_low.n_tweets_used == 3);
  // Count tie broken by summed confidence, then label.
  CHECK(user_level_predict(std::vector<TweetVote>{{"b", 0.4}, {"a", 0.3}}, 2, 0.0).label == "b");
  CHECK(user_level_predict(std::vector<TweetVote>{{"b", 0.3}, {"a", 0.3}}, 2, 0.0).label == "a");
}

TEST_CASE("unanimous votes win at any threshold") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TweetVote> v(1 + rng() % 20);
    for (auto& x : v) x = {"kw", conf(rng)};
    CHECK(user_level_predict(v, 1 + rng() % 30, conf(rng)).label == "kw");
  }
}

TEST_CASE("user-level sweep and CSV shape") {
  std::vector<UserCase> users;
  const V classes = {"eg", "kw", "sa"};
  for (int u = 0; u < 9; ++u) {
    UserCase c{"u" + std::to_string(u), classes[u % 3], {}};
    for (int t = 0; t < 600; ++t) c.votes.push_back({c.gold, 0.5 + 0.001 * (t % 100)});
    users.push_back(c);
  }
  const std::vector<std::size_t> ns = {10, 25, 50, 75, 100, 500};
  const std::vector<double> th = {0.0, 0.5, 0.9};
  const auto rows = user_level_sweep(users, ns, th, classes);
  CHECK(rows.size() == 18);
  for (const auto& r : rows) CHECK(r.accuracy == 100.0);

  std::ostringstream table, best;
  write_usereval_csv(rows, table);
  write_usereval_best_csv(rows, best);
  std::istringstream in(table.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "n,acc,thresh,F1,thresh");
  int n_rows = 0;
  while (std::getline(in, line)) {
    ++n_rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 4);
  }
  CHECK(n_rows == 18);
  const std::string best_text = best.str();
  CHECK(std::count(best_text.begin(), best_text.end(), '\n') == 7);
}

TEST_CASE("metrics JSON carries the confusion matrix") {
  const auto r = compute_metrics(V{"a", "b"}, V{"b", "b"}, V{"a", "b"});
  const auto j = metrics_json(r);
  CHECK(j["confusion"][0][1] == 1);
  CHECK(j["accuracy"] == 50.0);
  std::ostringstream csv;
  write_metrics_csv(r, csv);
  CHECK(csv.str().starts_with("label,precision,recall,f1,support\na,"));
}
