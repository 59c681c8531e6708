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

#include "hamtl/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

#include "hamtl/error.hpp"
#include "hamtl/kernels.hpp"

namespace hamtl::ag {

namespace {

thread_local bool g_grad_enabled = true;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::kShapeMismatch,
              std::string(op) + ": " + a.to_string() + " vs " + b.to_string());
}

void accumulate(std::vector<double>& dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

std::shared_ptr<Node> new_node(Shape shape, std::vector<double> value,
                               bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), 0.0);
  return node;
}

}  // namespace

std::string Shape::to_string() const {
  return "[" + std::to_string(rows) + " x " + std::to_string(cols) + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(shape, 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  return Tensor(new_node(shape, std::vector<double>(shape.size(), value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != shape.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                shape.to_string() + " needs " + std::to_string(shape.size()) +
                    " values, got " + std::to_string(values.size()));
  }
  return Tensor(new_node(shape, std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1, 1}, {value}, requires_grad);
}

double Tensor::item() const {
  if (size() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "item() on " + shape().to_string());
  }
  return node_->value[0];
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  return Tensor(new_node(shape(), node_->value, false));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> parents, BackwardFn backward,
                   const char* op) {
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  auto node = new_node(shape, std::move(value), needs);
  node->op = op;
  if (needs) {
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.shared());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

std::vector<Node*> topological_order(const Tensor& root) {
  std::vector<Node*> order;
  if (!root.defined() || !root.requires_grad()) return order;
  std::unordered_set<Node*> visited;
  // Iterative post-order DFS; recursion depth would track sequence length.
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw Error(ErrorCode::kDetachedTensor, "undefined loss");
  if (loss.size() != 1) {
    throw Error(ErrorCode::kNonScalarLoss, "loss has shape " + loss.shape().to_string());
  }
  if (!loss.requires_grad()) {
    throw Error(ErrorCode::kDetachedTensor, "loss is not connected to any parameter");
  }
  const auto order = topological_order(loss);
  for (Node* n : order) {
    if (n->backward) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

// --- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  kernels::gemm(false, false, m, n, k, {a.values().data(), k}, {b.values().data(), n},
                {out.data(), n}, false);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      kernels::gemm(false, true, m, k, n, {self.grad.data(), n}, {pb.value.data(), n},
                    {pa.grad.data(), k}, true);
    }
    if (pb.requires_grad) {
      kernels::gemm(true, false, k, n, m, {pa.value.data(), k}, {self.grad.data(), n},
                    {pb.grad.data(), n}, true);
    }
  }, "matmul");
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  const auto av = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return make_result({c, r}, std::move(out), {a}, [r, c](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[j * r + i];
  }, "transpose");
}

namespace {

// Shared body of add/sub: out = a + sign * b with optional row broadcast.
Tensor add_signed(const Tensor& a, const Tensor& b, double sign, const char* op) {
  const bool broadcast = b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols();
  if (!(a.shape() == b.shape()) && !broadcast) shape_error(op, a.shape(), b.shape());
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      out[i * c + j] += sign * bv[broadcast ? j : i * c + j];
  return make_result(a.shape(), std::move(out), {a, b},
                     [broadcast, sign, r, c](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) accumulate(pa.grad, self.grad);
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          pb.grad[broadcast ? j : i * c + j] += sign * self.grad[i * c + j];
    }
  }, op);
}

template <typename F, typename DF>
Tensor unary(const Tensor& a, F f, DF df_from_out, const char* op) {
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  return make_result(a.shape(), std::move(out), {a}, [df_from_out](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      p.grad[i] += self.grad[i] * df_from_out(self.value[i], p.value[i]);
    }
  }, op);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_signed(a, b, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_signed(a, b, -1.0, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) shape_error("mul", a.shape(), b.shape());
  std::vector<double> out(a.size());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.value[i];
      if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.value[i];
    }
  }, "mul");
}

Tensor scale(const Tensor& a, double factor) { return affine(a, factor, 0.0); }

Tensor affine(const Tensor& a, double alpha, double beta) {
  return unary(
      a, [=](double x) { return alpha * x + beta; },
      [=](double, double) { return alpha; }, "affine");
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double y, double) { return y * (1.0 - y); }, "sigmoid");
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double y, double) { return 1.0 - y * y; }, "tanh");
}

Tensor row_softmax(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = av.data() + i * c;
    double* y = out.data() + i * c;
    const double mx = *std::max_element(x, x + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < c; ++j) y[j] /= total;
  }
  return make_result(a.shape(), std::move(out), {a}, [r, c](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < r; ++i) {
      const double* y = self.value.data() + i * c;
      const double* g = self.grad.data() + i * c;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += y[j] * g[j];
      for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += y[j] * (g[j] - dot);
    }
  }, "row_softmax");
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw Error(ErrorCode::kInvalidArgument, "concat of nothing");
  if (axis != 0 && axis != 1) throw Error(ErrorCode::kInvalidArgument, "axis must be 0 or 1");
  std::size_t rows = 0, cols = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      if (p.cols() != parts[0].cols()) shape_error("concat", parts[0].shape(), p.shape());
      rows += p.rows();
    } else {
      if (p.rows() != parts[0].rows()) shape_error("concat", parts[0].shape(), p.shape());
      cols += p.cols();
    }
  }
  if (axis == 0) cols = parts[0].cols();
  else rows = parts[0].rows();

  std::vector<double> out(rows * cols);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const auto pv = p.values();
    if (axis == 0) {
      std::copy(pv.begin(), pv.end(), out.begin() + static_cast<long>(off * cols));
      off += p.rows();
    } else {
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < p.cols(); ++j)
          out[i * cols + off + j] = pv[i * p.cols() + j];
      off += p.cols();
    }
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_result({rows, cols}, std::move(out), std::move(parents),
                     [axis, rows, cols, offsets](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      const std::size_t pr = p.shape.rows, pc = p.shape.cols;
      for (std::size_t i = 0; i < pr; ++i)
        for (std::size_t j = 0; j < pc; ++j)
          p.grad[i * pc + j] += axis == 0 ? self.grad[(offsets[k] + i) * cols + j]
                                          : self.grad[i * cols + offsets[k] + j];
    }
    (void)rows;
  }, "concat");
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "slice_rows beyond " + a.shape().to_string());
  }
  const std::size_t c = a.cols();
  const auto av = a.values();
  std::vector<double> out(av.begin() + static_cast<long>(begin * c),
                          av.begin() + static_cast<long>((begin + count) * c));
  return make_result({count, c}, std::move(out), {a}, [begin, c](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[begin * c + i] += self.grad[i];
  }, "slice_rows");
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "slice_cols beyond " + a.shape().to_string());
  }
  const std::size_t r = a.rows(), c = a.cols();
  const auto av = a.values();
  std::vector<double> out(r * count);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = av[i * c + begin + j];
  return make_result({r, count}, std::move(out), {a}, [r, c, begin, count](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j)
        p.grad[i * c + begin + j] += self.grad[i * count + j];
  }, "slice_cols");
}

Tensor mean(const Tensor& a, int axis) {
  const std::size_t r = a.rows(), c = a.cols();
  const auto av = a.values();
  if (axis == 0) {
    std::vector<double> out(c, 0.0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[j] += av[i * c + j];
    for (auto& x : out) x /= static_cast<double>(r);
    return make_result({1, c}, std::move(out), {a}, [r, c](Node& self) {
      Node& p = *self.parents[0];
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          p.grad[i * c + j] += self.grad[j] / static_cast<double>(r);
    }, "mean0");
  }
  if (axis != 1) throw Error(ErrorCode::kInvalidArgument, "axis must be 0 or 1");
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i] += av[i * c + j];
    out[i] /= static_cast<double>(c);
  }
  return make_result({r, 1}, std::move(out), {a}, [r, c](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        p.grad[i * c + j] += self.grad[i] / static_cast<double>(c);
  }, "mean1");
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double x : a.values()) total += x;
  return make_result({1, 1}, {total}, {a}, [](Node& self) {
    Node& p = *self.parents[0];
    for (auto& g : p.grad) g += self.grad[0];
  }, "sum");
}

Tensor cross_entropy(const Tensor& probs, std::span<const int> targets) {
  const std::size_t r = probs.rows(), c = probs.cols();
  if (targets.size() != r) {
    throw Error(ErrorCode::kShapeMismatch,
                "cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                    probs.shape().to_string());
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  const auto pv = probs.values();
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (tgt[i] < 0 || static_cast<std::size_t>(tgt[i]) >= c) {
      throw Error(ErrorCode::kIdOutOfRange, "target class " + std::to_string(tgt[i]));
    }
    total -= std::log(pv[i * c + static_cast<std::size_t>(tgt[i])]);
  }
  return make_result({1, 1}, {total / static_cast<double>(r)}, {probs},
                     [tgt = std::move(tgt), r, c](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < r; ++i) {
      const std::size_t idx = i * c + static_cast<std::size_t>(tgt[i]);
      p.grad[idx] -= self.grad[0] / (static_cast<double>(r) * p.value[idx]);
    }
  }, "cross_entropy");
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  const std::size_t n = table.rows(), c = table.cols();
  std::vector<int> idx(ids.begin(), ids.end());
  std::vector<double> out(idx.size() * c);
  const auto tv = table.values();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= n) {
      throw Error(ErrorCode::kIdOutOfRange,
                  "id " + std::to_string(idx[i]) + " outside table of " +
                      std::to_string(n) + " rows");
    }
    std::copy_n(tv.begin() + static_cast<long>(static_cast<std::size_t>(idx[i]) * c), c,
                out.begin() + static_cast<long>(i * c));
  }
  const std::size_t count = idx.size();
  return make_result({count, c}, std::move(out), {table},
                     [idx = std::move(idx), c](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const std::size_t row = static_cast<std::size_t>(idx[i]);
      for (std::size_t j = 0; j < c; ++j) p.grad[row * c + j] += self.grad[i * c + j];
    }
  }, "gather_rows");
}

Tensor apply_dropout(const Tensor& x, double rate, bool training, std::uint64_t seed) {
  if (!(rate >= 0.0) || rate >= 1.0) {
    throw Error(ErrorCode::kInvalidRate, "dropout rate " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = unif(rng) < rate ? 0.0 : keep_scale;
  std::vector<double> out(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return make_result(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < mask.size(); ++i) p.grad[i] += self.grad[i] * mask[i];
  }, "dropout");
}

// --- Adam -----------------------------------------------------------------

AdamState make_adam_state(std::span<const Tensor> params, double learning_rate) {
  if (!(learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive");
  }
  AdamState state;
  state.learning_rate = learning_rate;
  for (const auto& p : params) {
    state.m.emplace_back(p.size(), 0.0);
    state.v.emplace_back(p.size(), 0.0);
  }
  return state;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "Adam state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                    std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (state.m[k].size() != params[k].size() || state.v[k].size() != params[k].size() ||
        params[k].grad().size() != params[k].size()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "Adam moments do not match parameter " + std::to_string(k) + " " +
                      params[k].shape().to_string());
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k].mutable_values();
    auto g = params[k].mutable_grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
      g[i] = 0.0;
    }
  }
}

}  // namespace hamtl::ag
