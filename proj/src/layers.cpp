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

#include "hamtl/layers.hpp"

#include <cmath>
#include <memory>

#include "hamtl/error.hpp"

namespace hamtl::layers {

namespace {

void check_layout(const Tensor& x, const SequenceLayout& layout, const char* op) {
  if (layout.lengths.size() != layout.batch) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(op) + ": layout has " + std::to_string(layout.lengths.size()) +
                    " lengths for batch " + std::to_string(layout.batch));
  }
  if (x.rows() != layout.rows()) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(op) + ": input " + x.shape().to_string() + " vs layout " +
                    std::to_string(layout.batch) + "x" + std::to_string(layout.steps));
  }
  for (auto len : layout.lengths) {
    if (len > layout.steps) {
      throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": length exceeds steps");
    }
  }
}

void require_nonempty(const SequenceLayout& layout, const char* op) {
  for (auto len : layout.lengths) {
    if (len == 0) throw Error(ErrorCode::kMaskEmpty, std::string(op) + ": mask_len = 0");
  }
}

void check_gru(const GRUCellParams& p) {
  const std::size_t g = 3 * p.hidden_size;
  if (!(p.w.shape() == ag::Shape{p.input_size, g}) ||
      !(p.u.shape() == ag::Shape{p.hidden_size, g}) || !(p.b.shape() == ag::Shape{1, g})) {
    throw Error(ErrorCode::kShapeMismatch, "inconsistent GRU parameter shapes");
  }
}

std::span<double> grad_or_empty(ag::Node& n) {
  return n.requires_grad ? std::span<double>(n.grad) : std::span<double>();
}

}  // namespace

Tensor scaled_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s = 1.0 / std::sqrt(static_cast<double>(rows));
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = normal(rng) * s;
  return Tensor::from({rows, cols}, std::move(v), true);
}

EmbeddingTable make_embedding(std::size_t vocab_size, std::size_t dim,
                              std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(vocab_size * dim);
  for (auto& x : v) x = normal(rng);
  return {Tensor::from({vocab_size, dim}, std::move(v), true)};
}

Tensor embed_lookup(std::span<const int> ids, const EmbeddingTable& table) {
  return ag::gather_rows(table.weight, ids);
}

GRUCellParams make_gru_params(std::size_t input_size, std::size_t hidden_size,
                              std::mt19937_64& rng) {
  GRUCellParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  p.w = scaled_normal(input_size, 3 * hidden_size, rng);
  p.u = scaled_normal(hidden_size, 3 * hidden_size, rng);
  p.b = Tensor::zeros({1, 3 * hidden_size}, true);
  return p;
}

Tensor gru_cell_step(const Tensor& x, const Tensor& h_prev, const GRUCellParams& p) {
  check_gru(p);
  const std::size_t H = p.hidden_size;
  if (x.cols() != p.input_size || h_prev.cols() != H || x.rows() != h_prev.rows()) {
    throw Error(ErrorCode::kShapeMismatch,
                "gru_cell_step: x " + x.shape().to_string() + ", h " +
                    h_prev.shape().to_string());
  }
  auto block = [&](const Tensor& m, std::size_t k) { return ag::slice_cols(m, k * H, H); };
  const Tensor xw = ag::add(ag::matmul(x, p.w), p.b);
  const Tensor z = ag::sigmoid(ag::add(block(xw, 0), ag::matmul(h_prev, block(p.u, 0))));
  const Tensor r = ag::sigmoid(ag::add(block(xw, 1), ag::matmul(h_prev, block(p.u, 1))));
  const Tensor cand =
      ag::tanh(ag::add(block(xw, 2), ag::matmul(ag::mul(r, h_prev), block(p.u, 2))));
  return ag::add(ag::mul(ag::affine(z, -1.0, 1.0), h_prev), ag::mul(z, cand));
}

Tensor gru_sequence(const Tensor& x, const SequenceLayout& layout,
                    const GRUCellParams& p, bool reverse) {
  check_gru(p);
  check_layout(x, layout, "gru_sequence");
  if (x.cols() != p.input_size) {
    throw Error(ErrorCode::kShapeMismatch,
                "gru_sequence: input " + x.shape().to_string() + " for input_size " +
                    std::to_string(p.input_size));
  }
  const std::size_t in = p.input_size, H = p.hidden_size;
  auto cache = std::make_shared<kernels::GruCache>();
  std::vector<double> out(layout.rows() * H);
  kernels::gru_sequence_forward(layout, in, H, reverse, x.values(), p.w.values(),
                                p.u.values(), p.b.values(), out, *cache);
  return ag::make_result({layout.rows(), H}, std::move(out), {x, p.w, p.u, p.b},
                         [layout, in, H, reverse, cache](ag::Node& self) {
    ag::Node& nx = *self.parents[0];
    ag::Node& nw = *self.parents[1];
    ag::Node& nu = *self.parents[2];
    ag::Node& nb = *self.parents[3];
    kernels::gru_sequence_backward(layout, in, H, reverse, nx.value, nw.value, nu.value,
                                   *cache, self.grad, grad_or_empty(nx),
                                   grad_or_empty(nw), grad_or_empty(nu),
                                   grad_or_empty(nb));
  }, "gru_sequence");
}

BiGRUParams make_bigru_params(std::size_t input_size, std::size_t hidden_size,
                              std::mt19937_64& rng) {
  BiGRUParams p;
  p.forward = make_gru_params(input_size, hidden_size, rng);
  p.backward = make_gru_params(input_size, hidden_size, rng);
  return p;
}

Tensor bigru_forward(const Tensor& x, const SequenceLayout& layout,
                     const BiGRUParams& params) {
  const Tensor parts[] = {gru_sequence(x, layout, params.forward, false),
                          gru_sequence(x, layout, params.backward, true)};
  return ag::concat(parts, 1);
}

MultiHeadAttentionParams make_attention_params(std::size_t d_model, std::size_t heads,
                                               std::mt19937_64& rng) {
  if (heads == 0 || d_model % heads != 0) {
    throw Error(ErrorCode::kShapeMismatch, "d_model " + std::to_string(d_model) +
                                               " not divisible by heads " +
                                               std::to_string(heads));
  }
  MultiHeadAttentionParams p;
  p.d_model = d_model;
  p.heads = heads;
  p.wq = scaled_normal(d_model, d_model, rng);
  p.wk = scaled_normal(d_model, d_model, rng);
  p.wv = scaled_normal(d_model, d_model, rng);
  p.wo = scaled_normal(d_model, d_model, rng);
  return p;
}

namespace {

void check_attention(const Tensor& h, const SequenceLayout& layout,
                     const MultiHeadAttentionParams& p) {
  check_layout(h, layout, "multi_head_attention");
  require_nonempty(layout, "multi_head_attention");
  if (p.heads == 0 || p.d_model % p.heads != 0 || h.cols() != p.d_model) {
    throw Error(ErrorCode::kShapeMismatch,
                "multi_head_attention: input " + h.shape().to_string() + ", d_model " +
                    std::to_string(p.d_model) + ", heads " + std::to_string(p.heads));
  }
}

// Fused masked attention core over projected Q, K, V.
Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        const SequenceLayout& layout, std::size_t heads) {
  const std::size_t D = q.cols();
  auto probs = std::make_shared<std::vector<double>>(layout.batch * heads * layout.steps *
                                                     layout.steps);
  std::vector<double> out(layout.rows() * D);
  kernels::masked_attention_forward(layout, D, heads, q.values(), k.values(), v.values(),
                                    out, *probs);
  return ag::make_result({layout.rows(), D}, std::move(out), {q, k, v},
                         [layout, D, heads, probs](ag::Node& self) {
    ag::Node& nq = *self.parents[0];
    ag::Node& nk = *self.parents[1];
    ag::Node& nv = *self.parents[2];
    kernels::masked_attention_backward(layout, D, heads, nq.value, nk.value, nv.value,
                                       *probs, self.grad, grad_or_empty(nq),
                                       grad_or_empty(nk), grad_or_empty(nv));
  }, "masked_attention");
}

}  // namespace

Tensor multi_head_attention(const Tensor& h, const SequenceLayout& layout,
                            const MultiHeadAttentionParams& p) {
  check_attention(h, layout, p);
  const Tensor q = ag::matmul(h, p.wq);
  const Tensor k = ag::matmul(h, p.wk);
  const Tensor v = ag::matmul(h, p.wv);
  return ag::matmul(masked_attention(q, k, v, layout, p.heads), p.wo);
}

std::vector<double> attention_weights(const Tensor& h, const SequenceLayout& layout,
                                      const MultiHeadAttentionParams& p) {
  check_attention(h, layout, p);
  ag::NoGradGuard no_grad;
  const Tensor q = ag::matmul(h, p.wq);
  const Tensor k = ag::matmul(h, p.wk);
  const Tensor v = ag::matmul(h, p.wv);
  std::vector<double> probs(layout.batch * p.heads * layout.steps * layout.steps);
  std::vector<double> out(layout.rows() * p.d_model);
  kernels::masked_attention_forward(layout, p.d_model, p.heads, q.values(), k.values(),
                                    v.values(), out, probs);
  return probs;
}

Tensor attention_pool(const Tensor& h, const SequenceLayout& layout) {
  check_layout(h, layout, "attention_pool");
  require_nonempty(layout, "attention_pool");
  const std::size_t B = layout.batch, T = layout.steps, D = h.cols();
  const auto hv = h.values();
  std::vector<double> out(B * D, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t len = layout.lengths[b];
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t d = 0; d < D; ++d) out[b * D + d] += hv[(b * T + t) * D + d];
    for (std::size_t d = 0; d < D; ++d) out[b * D + d] /= static_cast<double>(len);
  }
  return ag::make_result({B, D}, std::move(out), {h}, [layout, D](ag::Node& self) {
    ag::Node& p = *self.parents[0];
    const std::size_t T = layout.steps;
    for (std::size_t b = 0; b < layout.batch; ++b) {
      const std::size_t len = layout.lengths[b];
      for (std::size_t t = 0; t < len; ++t)
        for (std::size_t d = 0; d < D; ++d)
          p.grad[(b * T + t) * D + d] += self.grad[b * D + d] / static_cast<double>(len);
    }
  }, "attention_pool");
}

DenseLayer make_dense(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {scaled_normal(in, out, rng), Tensor::zeros({1, out}, true)};
}

Tensor dense_logits(const Tensor& v, const DenseLayer& layer) {
  if (v.cols() != layer.w.rows() || layer.b.cols() != layer.w.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "dense: input " + v.shape().to_string() +
                                               ", weight " + layer.w.shape().to_string());
  }
  return ag::add(ag::matmul(v, layer.w), layer.b);
}

Tensor classify_head(const Tensor& v, const DenseLayer& head) {
  return ag::row_softmax(dense_logits(v, head));
}

namespace reference {

Tensor gru_sequence(const Tensor& x, const SequenceLayout& layout,
                    const GRUCellParams& p, bool reverse) {
  check_gru(p);
  check_layout(x, layout, "reference::gru_sequence");
  const std::size_t T = layout.steps, H = p.hidden_size;
  std::vector<Tensor> rows(layout.rows());
  const Tensor zero_row = Tensor::zeros({1, H});
  for (std::size_t b = 0; b < layout.batch; ++b) {
    Tensor h = Tensor::zeros({1, H});
    for (std::size_t s = 0; s < T; ++s) {
      const std::size_t t = reverse ? T - 1 - s : s;
      if (!layout.active(b, t)) {
        rows[b * T + t] = zero_row;
        continue;
      }
      h = gru_cell_step(ag::slice_rows(x, b * T + t, 1), h, p);
      rows[b * T + t] = h;
    }
  }
  return ag::concat(rows, 0);
}

Tensor multi_head_attention(const Tensor& h, const SequenceLayout& layout,
                            const MultiHeadAttentionParams& p) {
  check_attention(h, layout, p);
  const std::size_t T = layout.steps, dk = p.d_k();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const Tensor q = ag::matmul(h, p.wq);
  const Tensor k = ag::matmul(h, p.wk);
  const Tensor v = ag::matmul(h, p.wv);
  std::vector<Tensor> sequences;
  for (std::size_t b = 0; b < layout.batch; ++b) {
    const std::size_t len = layout.lengths[b];
    const Tensor qb = ag::slice_rows(q, b * T, T);
    const Tensor kb = ag::slice_rows(k, b * T, len);
    const Tensor vb = ag::slice_rows(v, b * T, len);
    std::vector<double> row_mask(T * dk, 0.0);
    std::fill(row_mask.begin(), row_mask.begin() + static_cast<long>(len * dk), 1.0);
    const Tensor mask = Tensor::from({T, dk}, std::move(row_mask));
    std::vector<Tensor> head_out;
    for (std::size_t hd = 0; hd < p.heads; ++hd) {
      const Tensor qh = ag::slice_cols(qb, hd * dk, dk);
      const Tensor kh = ag::slice_cols(kb, hd * dk, dk);
      const Tensor vh = ag::slice_cols(vb, hd * dk, dk);
      const Tensor weights =
          ag::row_softmax(ag::scale(ag::matmul(qh, ag::transpose(kh)), scale));
      head_out.push_back(ag::mul(ag::matmul(weights, vh), mask));
    }
    sequences.push_back(ag::concat(head_out, 1));
  }
  return ag::matmul(ag::concat(sequences, 0), p.wo);
}

}  // namespace reference

}  // namespace hamtl::layers
