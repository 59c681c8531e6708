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

// Dense reverse-mode differentiation over row-major double matrices.
//
// Every Tensor is rank 2 (vectors are 1 x n, scalars 1 x 1). Operations whose
// inputs require gradients record a node holding their parents and a backward
// closure; backward() orders those nodes topologically from the loss and
// replays the closures once each. Dropping the last handle to a loss frees
// the recorded graph, so a training step's tape lives exactly as long as its
// loss tensor.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hamtl::ag {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  std::string to_string() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct Node;
using BackwardFn = std::function<void(Node& self)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;  // empty for leaves
  const char* op = "leaf";
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->shape.rows; }
  std::size_t cols() const { return node_->shape.cols; }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }

  double at(std::size_t r, std::size_t c) const {
    return node_->value[r * node_->shape.cols + c];
  }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return !node_->backward; }
  void zero_grad();

  // Same values, no history.
  Tensor detach() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording on this thread while alive (evaluation passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Builds an op result. Records `backward` only when grad mode is on and some
// parent requires gradients.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> parents, BackwardFn backward,
                   const char* op);

// Nodes reachable from `root` that require gradients, parents before children.
std::vector<Node*> topological_order(const Tensor& root);

// Accumulates d(loss)/d(t) into every reachable leaf with requires_grad.
// Intermediate gradients are recomputed from scratch on each call.
void backward(const Tensor& loss);

// --- forward ops ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// b may have a's shape or be a 1 x cols row broadcast over a's rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// alpha * a + beta
Tensor affine(const Tensor& a, double alpha, double beta);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor row_softmax(const Tensor& a);
Tensor concat(std::span<const Tensor> parts, int axis);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
// axis 0 -> 1 x cols, axis 1 -> rows x 1
Tensor mean(const Tensor& a, int axis);
Tensor sum(const Tensor& a);
// Mean over rows of -log(probs[row, targets[row]]).
Tensor cross_entropy(const Tensor& probs, std::span<const int> targets);
// out[i] = table[ids[i]]
Tensor gather_rows(const Tensor& table, std::span<const int> ids);

// Inverted dropout: survivors are scaled by 1 / (1 - rate). The mask is a
// function of `seed` only.
Tensor apply_dropout(const Tensor& x, double rate, bool training,
                     std::uint64_t seed);

// --- optimizer ------------------------------------------------------------

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

AdamState make_adam_state(std::span<const Tensor> params,
                          double learning_rate = 1e-3);

// One bias-corrected Adam update from each parameter's accumulated grad, then
// zeroes those grads.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace hamtl::ag
