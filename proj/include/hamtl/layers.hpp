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

// Neural building blocks over packed sequence batches.
//
// A batch of B sequences padded to T steps is one (B*T) x d tensor whose row
// b*T + t holds position t of sequence b; a SequenceLayout carries B, T and
// the per-sequence real lengths. Row-vector convention throughout: a dense
// layer computes x W + b with W stored in_features x out_features.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "hamtl/autograd.hpp"
#include "hamtl/kernels.hpp"

namespace hamtl::layers {

using ag::Tensor;
using kernels::SequenceLayout;

// Matrix with N(0,1) / sqrt(fan_in) entries, fan_in = rows.
Tensor scaled_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

struct EmbeddingTable {
  Tensor weight;  // vocab x dim, N(0,1)
};

EmbeddingTable make_embedding(std::size_t vocab_size, std::size_t dim,
                              std::mt19937_64& rng);

Tensor embed_lookup(std::span<const int> ids, const EmbeddingTable& table);

// Gate blocks are stacked along columns in the order [update z | reset r |
// candidate h].
struct GRUCellParams {
  Tensor w;  // input_size x 3H
  Tensor u;  // H x 3H
  Tensor b;  // 1 x 3H
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
};

GRUCellParams make_gru_params(std::size_t input_size, std::size_t hidden_size,
                              std::mt19937_64& rng);

// z = s(x Wz + h Uz + bz), r = s(x Wr + h Ur + br),
// c = tanh(x Wh + (r * h) Uh + bh), h' = (1 - z) * h + z * c.
// x: B x in, h_prev: B x H. Built from primitive tape ops.
Tensor gru_cell_step(const Tensor& x, const Tensor& h_prev,
                     const GRUCellParams& params);

// One direction over a packed batch (fused kernel). Output rows at padded
// positions are zero; the initial state is zero.
Tensor gru_sequence(const Tensor& x, const SequenceLayout& layout,
                    const GRUCellParams& params, bool reverse);

struct BiGRUParams {
  GRUCellParams forward;
  GRUCellParams backward;
};

BiGRUParams make_bigru_params(std::size_t input_size, std::size_t hidden_size,
                              std::mt19937_64& rng);

// (B*T) x 2H: [left-to-right | right-to-left] per position.
Tensor bigru_forward(const Tensor& x, const SequenceLayout& layout,
                     const BiGRUParams& params);

struct MultiHeadAttentionParams {
  Tensor wq, wk, wv;  // d_model x d_model; head h owns columns [h*dk, (h+1)*dk)
  Tensor wo;          // d_model x d_model output projection
  std::size_t d_model = 0;
  std::size_t heads = 0;

  std::size_t d_k() const { return d_model / heads; }
};

MultiHeadAttentionParams make_attention_params(std::size_t d_model,
                                               std::size_t heads,
                                               std::mt19937_64& rng);

// Self-attention: Q, K, V all projected from h. Keys past each sequence's
// length are masked out and padded query rows output zero.
Tensor multi_head_attention(const Tensor& h, const SequenceLayout& layout,
                            const MultiHeadAttentionParams& params);

// Softmax weights, batch x heads x steps x steps, for inspection.
std::vector<double> attention_weights(const Tensor& h, const SequenceLayout& layout,
                                      const MultiHeadAttentionParams& params);

// B x d: mean of each sequence's first `length` rows.
Tensor attention_pool(const Tensor& h, const SequenceLayout& layout);

struct DenseLayer {
  Tensor w;  // in x out
  Tensor b;  // 1 x out
};

DenseLayer make_dense(std::size_t in, std::size_t out, std::mt19937_64& rng);

Tensor dense_logits(const Tensor& v, const DenseLayer& layer);

// row_softmax(v W + b)
Tensor classify_head(const Tensor& v, const DenseLayer& head);

// Serial reference routes composed from primitive tape ops, one sequence at a
// time. Kept to cross-check the fused kernels.
namespace reference {

Tensor gru_sequence(const Tensor& x, const SequenceLayout& layout,
                    const GRUCellParams& params, bool reverse);

Tensor multi_head_attention(const Tensor& h, const SequenceLayout& layout,
                            const MultiHeadAttentionParams& params);

}  // namespace reference

}  // namespace hamtl::layers
