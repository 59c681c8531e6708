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

// Independent oracles shared by the unit tests and the acceptance binary.
// Nothing here calls the code it checks except through its public API.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hamtl/autograd.hpp"
#include "hamtl/corpus.hpp"
#include "hamtl/error.hpp"

namespace hamtl::testing {

using ag::Tensor;

// Code of the hamtl::Error f throws; nullopt when it returns normally.
inline std::optional<ErrorCode> error_code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            bool requires_grad = true, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = n(rng);
  return Tensor::from({rows, cols}, std::move(v), requires_grad);
}

// ||a - n||_inf / max(||a||_inf, ||n||_inf), 0 when both vanish.
inline double max_rel_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return scale == 0.0 ? 0.0 : diff / scale;
}

inline double dot(const Tensor& out, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += out.values()[i] * w[i];
  return s;
}

// Central finite differences of <f(), R> for a fixed random R against the
// tape gradient. Returns the worst per-tensor relative error.
inline double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                         std::mt19937_64& rng, double h = 1e-5) {
  Tensor probe = f();
  const Tensor weights = random_tensor(probe.rows(), probe.cols(), rng, false);
  const auto w = weights.values();

  for (auto& t : inputs) t.zero_grad();
  ag::backward(ag::sum(ag::mul(f(), weights)));
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

  ag::NoGradGuard no_grad;
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_values();
    std::vector<double> numeric(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = dot(f(), w);
      values[i] = saved - h;
      const double down = dot(f(), w);
      values[i] = saved;
      numeric[i] = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, max_rel_error(analytic[k], numeric));
  }
  return worst;
}

// Nested-loop confusion matrix metrics on the 0-100 scale.
struct BruteMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> f1;
};

inline BruteMetrics brute_force_metrics(const std::vector<int>& y_true,
                                        const std::vector<int>& y_pred, int n_classes) {
  BruteMetrics m;
  int correct = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) correct += y_true[i] == y_pred[i];
  m.accuracy = y_true.empty() ? 0.0 : 100.0 * correct / static_cast<double>(y_true.size());
  for (int c = 0; c < n_classes; ++c) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      if (y_pred[i] == c && y_true[i] == c) ++tp;
      if (y_pred[i] == c && y_true[i] != c) ++fp;
      if (y_pred[i] != c && y_true[i] == c) ++fn;
    }
    const double p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
    const double r = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
    const double f = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    m.f1.push_back(100.0 * f);
  }
  double s = 0.0;
  for (double f : m.f1) s += f;
  m.macro_f1 = n_classes == 0 ? 0.0 : s / n_classes;
  return m;
}

// Multinomial naive Bayes with add-one smoothing over whitespace tokens.
class UnigramBayes {
 public:
  void fit(const std::vector<std::string>& texts, const std::vector<std::string>& labels) {
    for (std::size_t i = 0; i < texts.size(); ++i) {
      auto& c = classes_[labels[i]];
      ++c.docs;
      for (const auto& tok : corpus::tokenize(texts[i])) {
        ++c.counts[tok];
        ++c.total;
        vocab_[tok] = true;
      }
    }
    docs_ = texts.size();
  }

  std::string predict(const std::string& text) const {
    std::string best;
    double best_score = -INFINITY;
    const auto toks = corpus::tokenize(text);
    for (const auto& [label, c] : classes_) {
      double s = std::log(static_cast<double>(c.docs) / static_cast<double>(docs_));
      for (const auto& tok : toks) {
        const auto it = c.counts.find(tok);
        const double n = it == c.counts.end() ? 0.0 : static_cast<double>(it->second);
        s += std::log((n + 1.0) / (static_cast<double>(c.total) + static_cast<double>(vocab_.size())));
      }
      if (s > best_score) {
        best_score = s;
        best = label;
      }
    }
    return best;
  }

 private:
  struct ClassStats {
    std::size_t docs = 0;
    std::size_t total = 0;
    std::map<std::string, std::size_t> counts;
  };
  std::map<std::string, ClassStats> classes_;
  std::map<std::string, bool> vocab_;
  std::size_t docs_ = 0;
};

}  // namespace hamtl::testing
